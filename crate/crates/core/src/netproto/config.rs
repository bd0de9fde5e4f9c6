use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use super::NetError;
use crate::crypto::{nitc_gen, NitcCrs, DEFAULT_KAPPA, DEFAULT_MODULUS_BITS, TEST_PROFILE_BITS};
use crate::domain::{DiscreteDistribution, ValueDomain};
use crate::mechanism::{AscendingAuction, AuctionRules, SecondPrice};
use crate::rational::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MechanismKind {
    SecondPrice,
    Ascending,
}

impl MechanismKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "second-price" | "second_price" | "sp" => Some(MechanismKind::SecondPrice),
            "ascending" | "asc" => Some(MechanismKind::Ascending),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MechanismKind::SecondPrice => "second-price",
            MechanismKind::Ascending => "ascending",
        }
    }
}

/// Logical rounds of the four protocol deadlines.
///
/// `t1`: commitments. `t2`: retrievability challenges. `t3`: openings.
/// `t4`: the blockchain post. The platform answers in the rounds between.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Deadlines {
    pub t1: u32,
    pub t2: u32,
    pub t3: u32,
    pub t4: u32,
}

impl Default for Deadlines {
    fn default() -> Self {
        Deadlines {
            t1: 1,
            t2: 3,
            t3: 5,
            t4: 9,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProtocolConfig {
    pub mechanism: MechanismKind,
    pub k: usize,
    pub domain: ValueDomain,
    pub reserve: Rational,
    /// RSA modulus size of the timed commitment.
    pub modulus_bits: u64,
    /// Number of code positions each player challenges.
    pub kappa: usize,
    /// Sequential squarings `T` of the timed commitment.
    pub difficulty: u64,
    /// Length of every player's coin.
    pub coin_bits: usize,
    pub deadlines: Deadlines,
    pub seed: u64,
}

impl ProtocolConfig {
    pub fn new(domain: ValueDomain, reserve: Rational, k: usize) -> Self {
        ProtocolConfig {
            mechanism: MechanismKind::SecondPrice,
            k,
            domain,
            reserve,
            modulus_bits: DEFAULT_MODULUS_BITS,
            kappa: DEFAULT_KAPPA,
            difficulty: 1 << 16,
            coin_bits: 128,
            deadlines: Deadlines::default(),
            seed: 0,
        }
    }

    /// Reserve taken from the prior.
    pub fn with_prior(dist: &DiscreteDistribution, k: usize) -> Result<Self, NetError> {
        let reserve = dist
            .reserve()
            .map_err(|e| NetError::ConfigInvalid(e.to_string()))?;
        Ok(ProtocolConfig::new(dist.domain().clone(), reserve, k))
    }

    /// Small insecure parameters for CI.
    pub fn test_profile(mut self) -> Self {
        self.modulus_bits = TEST_PROFILE_BITS;
        self.difficulty = 1 << 10;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_mechanism(mut self, mechanism: MechanismKind) -> Self {
        self.mechanism = mechanism;
        self
    }

    pub fn coin_bytes(&self) -> usize {
        self.coin_bits / 8
    }

    pub fn rules(&self) -> Result<Box<dyn AuctionRules>, NetError> {
        let rules: Box<dyn AuctionRules> = match self.mechanism {
            MechanismKind::SecondPrice => Box::new(
                SecondPrice::new(self.domain.clone(), self.reserve.clone(), self.k)
                    .map_err(|e| NetError::ConfigInvalid(e.to_string()))?,
            ),
            MechanismKind::Ascending => Box::new(
                AscendingAuction::new(self.domain.clone(), self.reserve.clone(), self.k)
                    .map_err(|e| NetError::ConfigInvalid(e.to_string()))?,
            ),
        };
        Ok(rules)
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: String| Err(NetError::ConfigInvalid(m));
        self.rules()?;
        if self.kappa == 0 {
            return bad("kappa must be positive".into());
        }
        if self.difficulty == 0 {
            return bad("difficulty must be positive".into());
        }
        if self.modulus_bits < 64 {
            return bad(format!(
                "modulus of {} bits is too small",
                self.modulus_bits
            ));
        }
        if self.coin_bits == 0 || !self.coin_bits.is_multiple_of(8) {
            return bad(format!(
                "coin length {} is not a positive multiple of 8",
                self.coin_bits
            ));
        }
        let d = self.deadlines;
        if d.t1 == 0 || d.t2 < d.t1 + 2 || d.t3 < d.t2 + 2 || d.t4 < d.t3 + 4 {
            return bad(format!(
                "deadlines {}, {}, {}, {} leave no room for the platform's replies",
                d.t1, d.t2, d.t3, d.t4
            ));
        }
        Ok(())
    }
}

type CrsCache = Mutex<HashMap<(u64, u64), Arc<NitcCrs>>>;

/// Trusted setup for the given parameters. The reference string is derived
/// from a fixed label, so it is the same in every process, and it is cached.
pub fn setup(config: &ProtocolConfig) -> Result<Arc<NitcCrs>, NetError> {
    static CACHE: OnceLock<CrsCache> = OnceLock::new();
    let key = (config.modulus_bits, config.difficulty);
    let mut cache = CACHE
        .get_or_init(Default::default)
        .lock()
        .unwrap_or_else(|e| e.into_inner());
    if let Some(crs) = cache.get(&key) {
        return Ok(crs.clone());
    }
    let mut h = Sha256::new();
    h.update(b"setup");
    h.update(key.0.to_be_bytes());
    h.update(key.1.to_be_bytes());
    let mut rng = ChaCha20Rng::from_seed(h.finalize().into());
    let crs = Arc::new(nitc_gen(key.0, key.1, &mut rng)?);
    cache.insert(key, crs.clone());
    Ok(crs)
}
