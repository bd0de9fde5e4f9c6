//! Non-interactive timed commitments in an RSA group.
//!
//! A commitment to `m` is `u = g^s`, a ciphertext of `len(m) ‖ m ‖ s` under
//! the key `H(h^s)` with `h = g^(2^T)`, and a tag `H(m ‖ s)`. The committer
//! opens with `s`; anyone else recovers `h^s = u^(2^T)` by `T` sequential
//! squarings and proves the result with a Wesolowski proof.
//!
//! This gives hiding up to `T` squarings, binding, and publicly verifiable
//! forced openings. It does not give CCA-style non-malleability.

use num_bigint::{BigUint, RandBigInt};
use num_traits::One;
use rand::RngCore;
use sha2::{Digest, Sha256};

use super::encoding::{hash_parts, Hash256, Reader, Writer};
use super::poe::{self, PoeProof};
use super::primes::safe_prime;
use super::CryptoError;

/// Longest message a single commitment carries.
pub const MAX_MESSAGE_LEN: usize = 1024;
/// Extra exponent bits beyond the modulus size, for statistical hiding of `s`.
const EXPONENT_SLACK_BITS: u64 = 128;
pub const HASH_ID: &str = "sha256";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NitcCrs {
    pub modulus: BigUint,
    pub base: BigUint,
    /// `g^(2^T) mod N`.
    pub shortcut: BigUint,
    pub difficulty: u64,
    pub hash_id: String,
}

impl NitcCrs {
    /// Builds a reference string from public parts, deriving the shortcut
    /// by `T` sequential squarings.
    pub fn from_public(
        modulus: BigUint,
        base: BigUint,
        difficulty: u64,
    ) -> Result<Self, CryptoError> {
        if difficulty == 0 {
            return Err(CryptoError::InvalidDifficulty);
        }
        let shortcut = poe::repeated_squaring(&modulus, &base, difficulty);
        Ok(NitcCrs {
            modulus,
            base,
            shortcut,
            difficulty,
            hash_id: HASH_ID.to_string(),
        })
    }

    pub fn modulus_len(&self) -> usize {
        (self.modulus.bits() as usize).div_ceil(8)
    }

    fn exponent_len(&self) -> usize {
        ((self.modulus.bits() + EXPONENT_SLACK_BITS) as usize).div_ceil(8)
    }

    /// Ciphertext length for a message of `message_len` bytes.
    pub fn ciphertext_len(&self, message_len: usize) -> usize {
        4 + message_len + self.exponent_len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        Writer::new()
            .bytes(self.hash_id.as_bytes())
            .big(&self.modulus)
            .big(&self.base)
            .big(&self.shortcut)
            .u64(self.difficulty)
            .finish()
    }

    pub fn digest(&self) -> Hash256 {
        hash_parts("nitc/crs", &[&self.to_bytes()])
    }
}

/// Trusted setup: two safe primes, a random square as base, and the shortcut
/// computed from the group order. The factorization is dropped on return.
pub fn nitc_gen<R: RngCore + ?Sized>(
    modulus_bits: u64,
    difficulty: u64,
    rng: &mut R,
) -> Result<NitcCrs, CryptoError> {
    if difficulty == 0 {
        return Err(CryptoError::InvalidDifficulty);
    }
    if modulus_bits < 64 {
        return Err(CryptoError::ModulusTooSmall(modulus_bits));
    }
    let (p, q, modulus) = loop {
        let p = safe_prime(modulus_bits / 2, rng);
        let q = safe_prime(modulus_bits - modulus_bits / 2, rng);
        let n = &p * &q;
        if p != q && n.bits() == modulus_bits {
            break (p, q, n);
        }
    };
    let order = (&p - 1u32) * (&q - 1u32);
    let base = loop {
        let x = rng.gen_biguint_below(&modulus);
        let g = &x * &x % &modulus;
        if g > BigUint::one() && num_integer::Integer::gcd(&g, &modulus).is_one() {
            break g;
        }
    };
    let exponent = BigUint::from(2u32).modpow(&BigUint::from(difficulty), &order);
    let shortcut = base.modpow(&exponent, &modulus);
    Ok(NitcCrs {
        modulus,
        base,
        shortcut,
        difficulty,
        hash_id: HASH_ID.to_string(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TimedCommitment {
    pub u: BigUint,
    pub ciphertext: Vec<u8>,
    pub tag: Hash256,
}

impl TimedCommitment {
    pub fn to_bytes(&self, crs: &NitcCrs) -> Vec<u8> {
        let width = crs.modulus_len();
        let mut w = Writer::new();
        if self.u.bits() as usize <= width * 8 {
            w.big_fixed(&self.u, width);
        } else {
            w.big(&self.u);
        }
        w.bytes(&self.ciphertext).raw(&self.tag).finish()
    }

    pub fn from_bytes(crs: &NitcCrs, bytes: &[u8]) -> Result<Self, CryptoError> {
        let mut r = Reader::new(bytes);
        let u = BigUint::from_bytes_be(r.raw(crs.modulus_len())?);
        let ciphertext = r.bytes()?.to_vec();
        let tag = r.hash()?;
        r.finish()?;
        Ok(TimedCommitment { u, ciphertext, tag })
    }
}

/// Structural well-formedness certificate: a checksum binding the commitment
/// to the reference string.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComProof {
    pub checksum: Hash256,
}

impl ComProof {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.checksum.to_vec()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Opening {
    pub message: Vec<u8>,
    pub exponent: BigUint,
}

impl Opening {
    pub fn to_bytes(&self) -> Vec<u8> {
        Writer::new()
            .bytes(&self.message)
            .big(&self.exponent)
            .finish()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForcedProof {
    pub w: BigUint,
    pub poe: PoeProof,
}

impl ForcedProof {
    pub fn to_bytes(&self) -> Vec<u8> {
        Writer::new().big(&self.w).big(&self.poe.pi).finish()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForcedOpening {
    /// The decrypted message, or the raw plaintext when it does not parse.
    pub message: Vec<u8>,
    pub proof: ForcedProof,
    /// `false` when the plaintext is malformed or the tag does not match.
    pub consistent: bool,
}

fn keystream_xor(key: &Hash256, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len());
    for (counter, chunk) in data.chunks(32).enumerate() {
        let mut h = Sha256::new();
        h.update(b"nitc/stream");
        h.update(key);
        h.update((counter as u64).to_be_bytes());
        let block = h.finalize();
        out.extend(chunk.iter().zip(block.iter()).map(|(a, b)| a ^ b));
    }
    out
}

fn key_from(crs: &NitcCrs, w: &BigUint) -> Hash256 {
    let wb = Writer::new().big_fixed(w, crs.modulus_len()).finish();
    hash_parts("nitc/key", &[&wb])
}

fn exponent_bytes(crs: &NitcCrs, s: &BigUint) -> Vec<u8> {
    Writer::new().big_fixed(s, crs.exponent_len()).finish()
}

fn tag_of(crs: &NitcCrs, message: &[u8], s: &BigUint) -> Hash256 {
    hash_parts("nitc/tag", &[message, &exponent_bytes(crs, s)])
}

fn checksum_of(crs: &NitcCrs, cm: &TimedCommitment) -> Hash256 {
    hash_parts("nitc/com", &[&crs.digest(), &cm.to_bytes(crs)])
}

fn parse_plaintext(crs: &NitcCrs, plaintext: &[u8]) -> Option<(Vec<u8>, BigUint)> {
    let mut r = Reader::new(plaintext);
    let len = r.u32().ok()? as usize;
    if plaintext.len() != crs.ciphertext_len(len) {
        return None;
    }
    let message = r.raw(len).ok()?.to_vec();
    let s = BigUint::from_bytes_be(r.raw(crs.exponent_len()).ok()?);
    Some((message, s))
}

pub fn nitc_com<R: RngCore + ?Sized>(
    crs: &NitcCrs,
    message: &[u8],
    rng: &mut R,
) -> Result<(TimedCommitment, ComProof, Opening), CryptoError> {
    if message.len() > MAX_MESSAGE_LEN {
        return Err(CryptoError::MessageTooLong(message.len()));
    }
    let s = rng.gen_biguint(crs.modulus.bits() + EXPONENT_SLACK_BITS);
    let u = crs.base.modpow(&s, &crs.modulus);
    let key = key_from(crs, &crs.shortcut.modpow(&s, &crs.modulus));
    let plaintext = Writer::new()
        .u32(message.len() as u32)
        .raw(message)
        .raw(&exponent_bytes(crs, &s))
        .finish();
    let cm = TimedCommitment {
        u,
        ciphertext: keystream_xor(&key, &plaintext),
        tag: tag_of(crs, message, &s),
    };
    let proof = ComProof {
        checksum: checksum_of(crs, &cm),
    };
    Ok((
        cm,
        proof,
        Opening {
            message: message.to_vec(),
            exponent: s,
        },
    ))
}

/// Structural check: `1 < u < N`, ciphertext length in range, checksum matches.
pub fn com_vf(crs: &NitcCrs, cm: &TimedCommitment, proof: &ComProof) -> bool {
    let len = cm.ciphertext.len();
    cm.u > BigUint::one()
        && cm.u < crs.modulus
        && len >= crs.ciphertext_len(0)
        && len <= crs.ciphertext_len(MAX_MESSAGE_LEN)
        && proof.checksum == checksum_of(crs, cm)
}

pub fn dec_vf(crs: &NitcCrs, cm: &TimedCommitment, message: &[u8], opening: &Opening) -> bool {
    if opening.message != message
        || opening.exponent.bits() > crs.modulus.bits() + EXPONENT_SLACK_BITS
    {
        return false;
    }
    let s = &opening.exponent;
    if crs.base.modpow(s, &crs.modulus) != cm.u {
        return false;
    }
    let key = key_from(crs, &crs.shortcut.modpow(s, &crs.modulus));
    let plaintext = keystream_xor(&key, &cm.ciphertext);
    match parse_plaintext(crs, &plaintext) {
        Some((m, s2)) => m == message && &s2 == s && cm.tag == tag_of(crs, message, s),
        None => false,
    }
}

fn open_with(crs: &NitcCrs, cm: &TimedCommitment, w: &BigUint) -> (Vec<u8>, bool) {
    let plaintext = keystream_xor(&key_from(crs, w), &cm.ciphertext);
    match parse_plaintext(crs, &plaintext) {
        Some((m, s)) => {
            let ok = cm.tag == tag_of(crs, &m, &s) && crs.base.modpow(&s, &crs.modulus) == cm.u;
            (m, ok)
        }
        None => (plaintext, false),
    }
}

/// Recovers the committed message without the committer. Takes `T`
/// sequential squarings. Ill-formed plaintexts are returned raw with
/// `consistent = false`.
pub fn nitc_fdec(
    crs: &NitcCrs,
    cm: &TimedCommitment,
    proof: &ComProof,
) -> Result<ForcedOpening, CryptoError> {
    if !com_vf(crs, cm, proof) {
        return Err(CryptoError::MalformedCommitment);
    }
    let w = poe::repeated_squaring(&crs.modulus, &cm.u, crs.difficulty);
    let poe = poe::prove(&crs.modulus, &cm.u, &w, crs.difficulty);
    let (message, consistent) = open_with(crs, cm, &w);
    Ok(ForcedOpening {
        message,
        proof: ForcedProof { w, poe },
        consistent,
    })
}

/// Accepts iff the proof certifies `w = u^(2^T)` and `message` is exactly
/// what the ciphertext decrypts to under `H(w)`.
pub fn fdec_vf(crs: &NitcCrs, cm: &TimedCommitment, message: &[u8], proof: &ForcedProof) -> bool {
    if !poe::verify(&crs.modulus, &cm.u, &proof.w, crs.difficulty, &proof.poe) {
        return false;
    }
    open_with(crs, cm, &proof.w).0 == message
}

/// Like [`fdec_vf`], and additionally requires the tag to match.
pub fn fdec_vf_strict(
    crs: &NitcCrs,
    cm: &TimedCommitment,
    message: &[u8],
    proof: &ForcedProof,
) -> bool {
    if !poe::verify(&crs.modulus, &cm.u, &proof.w, crs.difficulty, &proof.poe) {
        return false;
    }
    let (m, consistent) = open_with(crs, cm, &proof.w);
    consistent && m == message
}
