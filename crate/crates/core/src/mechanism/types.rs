use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::MechanismError;
use crate::rational::Rational;

/// Player label. Identity `0` belongs to the seller.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Identity(pub u64);

impl Identity {
    pub const SELLER: Identity = Identity(0);

    pub fn is_seller(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bid {
    pub bidder: Identity,
    pub value: Rational,
}

/// Bids keyed by distinct, non-seller identities.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BidVector {
    entries: Vec<Bid>,
}

impl BidVector {
    pub fn new(entries: Vec<(Identity, Rational)>) -> Result<Self, MechanismError> {
        let mut seen = BTreeSet::new();
        for (id, _) in &entries {
            if id.is_seller() {
                return Err(MechanismError::SellerBid);
            }
            if !seen.insert(*id) {
                return Err(MechanismError::DuplicateIdentity(*id));
            }
        }
        Ok(BidVector {
            entries: entries
                .into_iter()
                .map(|(bidder, value)| Bid { bidder, value })
                .collect(),
        })
    }

    /// Identities `1..=n` bidding the given values in order.
    pub fn from_values(values: &[Rational]) -> Self {
        BidVector {
            entries: values
                .iter()
                .enumerate()
                .map(|(i, v)| Bid {
                    bidder: Identity(i as u64 + 1),
                    value: v.clone(),
                })
                .collect(),
        }
    }

    pub fn entries(&self) -> &[Bid] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: Identity) -> Option<&Rational> {
        self.entries
            .iter()
            .find(|b| b.bidder == id)
            .map(|b| &b.value)
    }

    pub fn identities(&self) -> impl Iterator<Item = Identity> + '_ {
        self.entries.iter().map(|b| b.bidder)
    }

    /// Appends bids, rejecting identities that already bid.
    pub fn extended(&self, extra: &[(Identity, Rational)]) -> Result<Self, MechanismError> {
        let mut all: Vec<(Identity, Rational)> = self
            .entries
            .iter()
            .map(|b| (b.bidder, b.value.clone()))
            .collect();
        all.extend(extra.iter().cloned());
        BidVector::new(all)
    }

    /// Replaces (or with `None` removes) one bidder's entry.
    pub fn with_bid(&self, id: Identity, value: Option<Rational>) -> Self {
        let mut entries: Vec<Bid> = self
            .entries
            .iter()
            .filter(|b| b.bidder != id)
            .cloned()
            .collect();
        if let Some(value) = value {
            entries.push(Bid { bidder: id, value });
        }
        BidVector { entries }
    }
}

/// Joint randomness fed to the rules; all tie-breaking is derived from it.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CoinString {
    #[serde(with = "hex_bytes")]
    bytes: Vec<u8>,
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}

impl fmt::Debug for CoinString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CoinString({})", hex::encode(&self.bytes))
    }
}

impl CoinString {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        CoinString { bytes }
    }

    pub fn zeros(len_bits: usize) -> Self {
        assert!(
            len_bits.is_multiple_of(8),
            "coin length must be a whole number of bytes"
        );
        CoinString {
            bytes: vec![0; len_bits / 8],
        }
    }

    pub fn random<R: rand::RngCore>(len_bits: usize, rng: &mut R) -> Self {
        let mut c = CoinString::zeros(len_bits);
        rng.fill_bytes(&mut c.bytes);
        c
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn len_bits(&self) -> usize {
        self.bytes.len() * 8
    }

    /// Bitwise XOR of all coins; `None` if the list is empty or lengths differ.
    pub fn xor_all(coins: &[CoinString]) -> Option<CoinString> {
        let (first, rest) = coins.split_first()?;
        let mut bytes = first.bytes.clone();
        for c in rest {
            if c.bytes.len() != bytes.len() {
                return None;
            }
            bytes.iter_mut().zip(&c.bytes).for_each(|(a, b)| *a ^= b);
        }
        Some(CoinString { bytes })
    }

    /// Deterministic PRG keyed by this coin and a purpose label.
    pub fn rng(&self, label: &str) -> ChaCha20Rng {
        let mut h = Sha256::new();
        h.update(label.as_bytes());
        h.update([0u8]);
        h.update(&self.bytes);
        ChaCha20Rng::from_seed(h.finalize().into())
    }
}

/// A player's slice of the result.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum PrivateOutcome {
    Buyer {
        allocated: bool,
        payment: Rational,
    },
    Seller {
        items_sold: usize,
        revenue: Rational,
    },
}

impl PrivateOutcome {
    /// Canonical byte layout: role byte, then big-endian length-prefixed fields.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let push_str = |out: &mut Vec<u8>, s: &str| {
            out.extend_from_slice(&(s.len() as u32).to_be_bytes());
            out.extend_from_slice(s.as_bytes());
        };
        match self {
            PrivateOutcome::Buyer { allocated, payment } => {
                out.push(1);
                out.push(*allocated as u8);
                push_str(&mut out, &payment.to_string());
            }
            PrivateOutcome::Seller {
                items_sold,
                revenue,
            } => {
                out.push(0);
                out.extend_from_slice(&(*items_sold as u64).to_be_bytes());
                push_str(&mut out, &revenue.to_string());
            }
        }
        out
    }
}

/// Allocation, payments and revenues of one auction.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuctionOutcome {
    pub allocations: BTreeMap<Identity, u8>,
    pub payments: BTreeMap<Identity, Rational>,
    #[serde(rename = "t")]
    pub items_sold: usize,
    pub seller_revenue: Rational,
    pub platform_revenue: Rational,
}

impl AuctionOutcome {
    /// Outcome where every listed bidder loses and pays nothing.
    pub fn empty<I: IntoIterator<Item = Identity>>(bidders: I) -> Self {
        let mut out = AuctionOutcome::default();
        for id in bidders {
            out.allocations.insert(id, 0);
            out.payments.insert(id, Rational::zero());
        }
        out
    }

    pub fn allocated(&self, id: Identity) -> bool {
        self.allocations.get(&id).copied().unwrap_or(0) == 1
    }

    pub fn payment(&self, id: Identity) -> Rational {
        self.payments.get(&id).cloned().unwrap_or_default()
    }

    pub fn total_payments(&self) -> Rational {
        self.payments.values().sum()
    }

    pub fn private_outcome(&self, id: Identity) -> PrivateOutcome {
        if id.is_seller() {
            PrivateOutcome::Seller {
                items_sold: self.items_sold,
                revenue: self.seller_revenue.clone(),
            }
        } else {
            PrivateOutcome::Buyer {
                allocated: self.allocated(id),
                payment: self.payment(id),
            }
        }
    }

    /// Consistency, budget feasibility, nonnegative payments, losers pay zero
    /// and platform revenue as the payment surplus.
    pub fn validate(&self) -> Result<(), String> {
        let sold: usize = self.allocations.values().map(|&x| x as usize).sum();
        if self.allocations.values().any(|&x| x > 1) {
            return Err("allocation outside {0,1}".into());
        }
        if sold != self.items_sold {
            return Err(format!("t = {} but Σx = {}", self.items_sold, sold));
        }
        if self.payments.values().any(Rational::is_negative) {
            return Err("negative payment".into());
        }
        for (id, p) in &self.payments {
            if !self.allocated(*id) && !p.is_zero() {
                return Err(format!("loser {id} pays {p}"));
            }
        }
        let total = self.total_payments();
        if self.seller_revenue > total {
            return Err("seller revenue exceeds total payments".into());
        }
        if self.platform_revenue != &total - &self.seller_revenue {
            return Err("platform revenue is not Σp − μ_S".into());
        }
        Ok(())
    }

    /// Checks individual rationality for bidders who bid their true values.
    pub fn individually_rational(&self, truthful: &BidVector) -> bool {
        truthful.entries().iter().all(|b| {
            let x = if self.allocated(b.bidder) {
                b.value.clone()
            } else {
                Rational::zero()
            };
            x >= self.payment(b.bidder)
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("outcome serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn bid_vector_rejects_duplicates_and_seller() {
        assert_eq!(
            BidVector::new(vec![(Identity(1), rat("0.5")), (Identity(1), rat("0.3"))]),
            Err(MechanismError::DuplicateIdentity(Identity(1)))
        );
        assert_eq!(
            BidVector::new(vec![(Identity(0), rat("0.5"))]),
            Err(MechanismError::SellerBid)
        );
    }

    #[test]
    fn outcome_json_shape() {
        let mut o = AuctionOutcome::empty([Identity(1), Identity(2)]);
        o.allocations.insert(Identity(1), 1);
        o.payments.insert(Identity(1), rat("0.35"));
        o.items_sold = 1;
        o.seller_revenue = rat("0.35");
        let json: serde_json::Value = serde_json::from_str(&o.to_json()).unwrap();
        assert_eq!(json["payments"]["1"], "7/20");
        assert_eq!(json["allocations"]["2"], 0);
        assert_eq!(json["t"], 1);
        assert_eq!(json["platform_revenue"], "0");
        assert_eq!(AuctionOutcome::from_json(&o.to_json()).unwrap(), o);
        assert!(o.validate().is_ok());
    }

    #[test]
    fn validate_catches_budget_violation() {
        let mut o = AuctionOutcome::empty([Identity(1)]);
        o.seller_revenue = rat("0.1");
        assert!(o.validate().is_err());
    }

    #[test]
    fn coin_rng_depends_on_label_and_bytes() {
        use rand::RngCore;
        let c = CoinString::from_bytes(vec![1, 2, 3]);
        let a = c.rng("tie").next_u64();
        assert_eq!(a, c.rng("tie").next_u64());
        assert_ne!(a, c.rng("other").next_u64());
        assert_ne!(
            a,
            CoinString::from_bytes(vec![1, 2, 4]).rng("tie").next_u64()
        );
    }
}
