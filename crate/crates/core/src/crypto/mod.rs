//! Cryptographic building blocks at desk scale.
//!
//! The timed commitment is an RSW time-lock with a trusted-setup shortcut and
//! a Wesolowski forced-opening proof. It is binding, publicly verifiable and
//! force-openable, but it is **not** non-malleable: a mauled ciphertext is
//! detected only through its tag. The argument-of-knowledge backend reveals
//! the witness. Moduli in the test profile are 512 bits and insecure.

pub mod aok;
pub mod encoding;
pub mod nitc;
pub mod poe;
pub mod por;
pub mod primes;
pub mod relation;
pub mod rs;
pub mod vc;

use thiserror::Error;

pub use aok::{AokBackend, TransparentAok, TransparentProof};
pub use encoding::{hash_parts, Hash256};
pub use nitc::{
    com_vf, dec_vf, fdec_vf, fdec_vf_strict, nitc_com, nitc_fdec, nitc_gen, ComProof,
    ForcedOpening, ForcedProof, NitcCrs, Opening, TimedCommitment,
};
pub use por::{por_challenge, por_respond, por_verify, DEFAULT_KAPPA};
pub use relation::{
    check_relation, BidOpening, CommittedBid, RelationContext, RelationFailure, RelationStatement,
    RelationWitness, WitnessEntry,
};
pub use rs::{rs_encode, rs_recons, RsCodeword, FIELD_MODULUS};
pub use vc::{vc_digest, vc_open, vc_vf, MerkleDigest, MerkleProof, MerkleTree};

/// Modulus size of the insecure CI profile.
pub const TEST_PROFILE_BITS: u64 = 512;
pub const DEFAULT_MODULUS_BITS: u64 = 2048;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("malformed encoding: {0}")]
    Decode(&'static str),
    #[error("difficulty T must be at least 1")]
    InvalidDifficulty,
    #[error("modulus of {0} bits is too small")]
    ModulusTooSmall(u64),
    #[error("message of {0} bytes exceeds the commitment block")]
    MessageTooLong(usize),
    #[error("commitment fails the structural check")]
    MalformedCommitment,
    #[error("index {index} outside a vector of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("{known} known symbols, at least {needed} required")]
    InsufficientSymbols { known: usize, needed: usize },
    #[error("known symbols are not consistent with any codeword")]
    InconsistentSymbols,
    #[error("symbol {0} is outside the field")]
    SymbolOutOfField(u32),
    #[error("cannot encode an empty message")]
    EmptyMessage,
    #[error("challenge of {kappa} indices exceeds codeword length {len}")]
    ChallengeTooLarge { kappa: usize, len: usize },
}

#[cfg(test)]
pub(crate) fn test_crs() -> &'static NitcCrs {
    use rand::SeedableRng;
    static CRS: std::sync::OnceLock<NitcCrs> = std::sync::OnceLock::new();
    CRS.get_or_init(|| {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(0x5eed);
        nitc_gen(TEST_PROFILE_BITS, 1 << 10, &mut rng).expect("test crs")
    })
}
