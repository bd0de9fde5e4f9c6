//! Wesolowski-style proof that `w = u^(2^T) mod N`.

use num_bigint::BigUint;
use num_traits::One;

use super::encoding::{hash_parts, Writer};
use super::primes::next_prime;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoeProof {
    pub pi: BigUint,
}

/// Fiat–Shamir challenge: the next prime after `H(u ‖ w ‖ T)` truncated to 128 bits.
pub fn challenge_prime(modulus: &BigUint, u: &BigUint, w: &BigUint, difficulty: u64) -> BigUint {
    let h = hash_parts(
        "poe/challenge",
        &[
            &modulus.to_bytes_be(),
            &u.to_bytes_be(),
            &w.to_bytes_be(),
            &difficulty.to_be_bytes(),
        ],
    );
    next_prime(&BigUint::from_bytes_be(&h[..16]))
}

/// `T` sequential modular squarings of `u`.
pub fn repeated_squaring(modulus: &BigUint, u: &BigUint, difficulty: u64) -> BigUint {
    let mut w = u % modulus;
    for _ in 0..difficulty {
        w = &w * &w % modulus;
    }
    w
}

pub fn prove(modulus: &BigUint, u: &BigUint, w: &BigUint, difficulty: u64) -> PoeProof {
    let l = challenge_prime(modulus, u, w, difficulty);
    let q = (BigUint::one() << difficulty) / &l;
    PoeProof {
        pi: u.modpow(&q, modulus),
    }
}

/// Checks `π^ℓ · u^(2^T mod ℓ) = w (mod N)`.
pub fn verify(
    modulus: &BigUint,
    u: &BigUint,
    w: &BigUint,
    difficulty: u64,
    proof: &PoeProof,
) -> bool {
    if &proof.pi >= modulus || w >= modulus || u >= modulus {
        return false;
    }
    let l = challenge_prime(modulus, u, w, difficulty);
    let r = BigUint::from(2u32).modpow(&BigUint::from(difficulty), &l);
    let lhs = proof.pi.modpow(&l, modulus) * u.modpow(&r, modulus) % modulus;
    &lhs == w
}

impl PoeProof {
    pub fn to_bytes(&self) -> Vec<u8> {
        Writer::new().big(&self.pi).finish()
    }
}
