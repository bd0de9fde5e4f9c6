//! Round-based simulation of the commit, prove-retrievability, open, prove
//! protocol between a platform, a seller and the buyers.
//!
//! Time is counted in logical rounds. Channels are pairwise between the
//! platform and each buyer or the seller; a message sent in round `r` is read
//! in round `r + 1`. Blockchain posts become visible one round later as well.

mod adversary;
mod analysis;
mod config;
mod engine;
mod messages;
mod roles;

use thiserror::Error;

use crate::crypto::CryptoError;
use crate::mechanism::{CoinString, MechanismError};

pub use adversary::{attack_suite, AdversaryScript};
pub use analysis::{
    compare_with_ideal, distribution_equivalence, honest_equivalence, protocol_utility_check,
    winner_marginals, DistributionReport, EquivalenceMismatch, EquivalenceReport,
    ProtocolUtilityReport,
};
pub use config::{setup, Deadlines, MechanismKind, ProtocolConfig};
pub use engine::{run_protocol, run_protocol_with, RunOptions};
pub use messages::Message;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("coin strings have different lengths")]
    LengthMismatch,
    #[error("adversary script cannot be applied: {0}")]
    AdversaryInvalid(String),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// XOR of the contributed coins.
pub fn xor_coin(coins: &[CoinString]) -> Result<CoinString, NetError> {
    CoinString::xor_all(coins).ok_or(NetError::LengthMismatch)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xor_coin_rejects_mixed_lengths() {
        let a = CoinString::from_bytes(vec![0xf0, 0x0f]);
        let b = CoinString::from_bytes(vec![0xff]);
        assert!(matches!(
            xor_coin(&[a.clone(), b]),
            Err(NetError::LengthMismatch)
        ));
        assert!(matches!(xor_coin(&[]), Err(NetError::LengthMismatch)));
        let c = CoinString::from_bytes(vec![0x0f, 0x0f]);
        assert_eq!(xor_coin(&[a, c]).unwrap().as_bytes(), &[0xff, 0x00]);
    }

    #[test]
    fn one_uniform_contributor_makes_the_xor_uniform() {
        // every adversarial choice of the other coin, every honest coin
        for adv in 0..=255u8 {
            let mut seen = [false; 256];
            for honest in 0..=255u8 {
                let r = xor_coin(&[
                    CoinString::from_bytes(vec![honest]),
                    CoinString::from_bytes(vec![adv]),
                ])
                .unwrap();
                seen[r.as_bytes()[0] as usize] = true;
            }
            assert!(seen.iter().all(|&s| s));
        }
    }
}
