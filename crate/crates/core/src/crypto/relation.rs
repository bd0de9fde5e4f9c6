//! The outcome relation: published digests and delivered outcomes are
//! consistent with the committed bids and the auction rules.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::encoding::{hash_parts, Hash256, Reader, Writer};
use super::nitc::{
    com_vf, dec_vf, fdec_vf, ComProof, ForcedProof, NitcCrs, Opening, TimedCommitment,
};
use super::rs::{bytes_to_symbols, rs_encode};
use super::vc::{vc_digest, MerkleDigest, MerkleTree};
use super::CryptoError;
use crate::domain::ValueDomain;
use crate::mechanism::{
    AuctionOutcome, AuctionRules, BidVector, CoinString, Identity, PrivateOutcome,
};
use crate::rational::Rational;

/// Everything the relation needs besides statement and witness.
#[derive(Clone, Copy)]
pub struct RelationContext<'a> {
    pub crs: &'a NitcCrs,
    pub rules: &'a dyn AuctionRules,
    pub coin_bytes: usize,
}

/// One entry `(i, c_i, π_i^com)` of the committed list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommittedBid {
    pub identity: Identity,
    pub commitment: TimedCommitment,
    pub com_proof: ComProof,
}

impl CommittedBid {
    pub fn to_bytes(&self, crs: &NitcCrs) -> Vec<u8> {
        Writer::new()
            .u64(self.identity.0)
            .bytes(&self.commitment.to_bytes(crs))
            .raw(&self.com_proof.checksum)
            .finish()
    }

    pub fn from_bytes(crs: &NitcCrs, bytes: &[u8]) -> Result<Self, CryptoError> {
        let mut r = Reader::new(bytes);
        let identity = Identity(r.u64()?);
        let commitment = TimedCommitment::from_bytes(crs, r.bytes()?)?;
        let checksum = r.hash()?;
        r.finish()?;
        Ok(CommittedBid {
            identity,
            commitment,
            com_proof: ComProof { checksum },
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BidOpening {
    Direct(Opening),
    Forced(ForcedProof),
}

/// The plaintext `i ‖ v_i ‖ r_i` inside each commitment. The value is a tick
/// index; `None` is the null bid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BidMessage {
    pub identity: Identity,
    pub tick: Option<u32>,
    pub coin: CoinString,
}

impl BidMessage {
    pub fn new(
        identity: Identity,
        value: Option<&Rational>,
        domain: &ValueDomain,
        coin: CoinString,
    ) -> Self {
        let tick = value.map(|v| domain.index_of(v).expect("value is a tick of the domain") as u32);
        BidMessage {
            identity,
            tick,
            coin,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u64(self.identity.0);
        match self.tick {
            Some(t) => w.u8(1).u32(t),
            None => w.u8(0).u32(0),
        };
        w.bytes(self.coin.as_bytes()).finish()
    }

    /// Strict parse; `None` for anything other than a well-formed message
    /// with the expected identity and coin length.
    pub fn parse(bytes: &[u8], identity: Identity, coin_bytes: usize) -> Option<Self> {
        let mut r = Reader::new(bytes);
        if Identity(r.u64().ok()?) != identity {
            return None;
        }
        let flag = r.u8().ok()?;
        let index = r.u32().ok()?;
        let tick = match flag {
            0 if index == 0 => None,
            1 => Some(index),
            _ => return None,
        };
        let coin = r.bytes().ok()?;
        if coin.len() != coin_bytes {
            return None;
        }
        let coin = CoinString::from_bytes(coin.to_vec());
        r.finish().ok()?;
        Some(BidMessage {
            identity,
            tick,
            coin,
        })
    }

    /// The bid and coin that an opened message contributes. Malformed
    /// messages, ticks outside the domain and any seller value all read as a
    /// null bid; malformed messages also contribute the all-zero coin.
    pub fn interpret(
        bytes: &[u8],
        identity: Identity,
        domain: &ValueDomain,
        coin_bytes: usize,
    ) -> (Option<Rational>, CoinString) {
        match BidMessage::parse(bytes, identity, coin_bytes) {
            Some(m) => {
                let value = if identity.is_seller() {
                    None
                } else {
                    m.tick.and_then(|t| domain.ticks().get(t as usize).cloned())
                };
                (value, m.coin)
            }
            None => (None, CoinString::from_bytes(vec![0; coin_bytes])),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WitnessEntry {
    pub bid: CommittedBid,
    pub opening: BidOpening,
    /// The opened plaintext `i ‖ v_i ‖ r_i`.
    pub message: Vec<u8>,
    pub outcome: PrivateOutcome,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationStatement {
    pub digest: MerkleDigest,
    pub outcome_digest: MerkleDigest,
    pub n: usize,
    pub platform_coin: CoinString,
}

impl RelationStatement {
    pub fn to_bytes(&self) -> Vec<u8> {
        Writer::new()
            .raw(&self.digest.0)
            .raw(&self.outcome_digest.0)
            .u64(self.n as u64)
            .bytes(self.platform_coin.as_bytes())
            .finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let mut r = Reader::new(bytes);
        let digest = MerkleDigest(r.hash()?);
        let outcome_digest = MerkleDigest(r.hash()?);
        let n = r.u64()? as usize;
        let platform_coin = CoinString::from_bytes(r.bytes()?.to_vec());
        r.finish()?;
        Ok(RelationStatement {
            digest,
            outcome_digest,
            n,
            platform_coin,
        })
    }

    pub fn hash(&self) -> Hash256 {
        hash_parts("relation/statement", &[&self.to_bytes()])
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationWitness {
    pub code: Vec<u32>,
    pub entries: Vec<WitnessEntry>,
}

impl RelationWitness {
    pub fn to_bytes(&self, crs: &NitcCrs) -> Vec<u8> {
        let mut w = Writer::new();
        w.u32(self.code.len() as u32);
        for s in &self.code {
            w.u32(*s);
        }
        w.u32(self.entries.len() as u32);
        for e in &self.entries {
            w.bytes(&e.bid.to_bytes(crs));
            match &e.opening {
                BidOpening::Direct(o) => w.u8(0).bytes(&o.to_bytes()),
                BidOpening::Forced(p) => w.u8(1).bytes(&p.to_bytes()),
            };
            w.bytes(&e.message).bytes(&e.outcome.to_bytes());
        }
        w.finish()
    }
}

/// The first bullet of the relation that fails, numbered 1 to 7.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationFailure {
    pub bullet: u8,
    pub reason: String,
}

impl fmt::Display for RelationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "condition {} fails: {}", self.bullet, self.reason)
    }
}

fn fail(bullet: u8, reason: impl Into<String>) -> Result<(), RelationFailure> {
    Err(RelationFailure {
        bullet,
        reason: reason.into(),
    })
}

/// Serialization of the committed list `𝐜`.
pub fn commitment_list_bytes(crs: &NitcCrs, bids: &[CommittedBid]) -> Vec<u8> {
    let mut w = Writer::new();
    w.u32(bids.len() as u32);
    for b in bids {
        w.bytes(&b.to_bytes(crs));
    }
    w.finish()
}

pub fn encode_commitment_list(crs: &NitcCrs, bids: &[CommittedBid]) -> Vec<u32> {
    rs_encode(&bytes_to_symbols(&commitment_list_bytes(crs, bids)))
        .expect("framed payload is never empty")
        .symbols
}

pub fn code_tree(code: &[u32]) -> (MerkleDigest, MerkleTree) {
    vc_digest(code.iter().map(|s| s.to_be_bytes().to_vec()).collect())
}

/// Leaf `(i, c_i, π_i^com, out_i)` of the outcome vector.
pub fn outcome_leaf(crs: &NitcCrs, bid: &CommittedBid, outcome: &PrivateOutcome) -> Vec<u8> {
    Writer::new()
        .bytes(&bid.to_bytes(crs))
        .bytes(&outcome.to_bytes())
        .finish()
}

pub fn outcome_tree(
    crs: &NitcCrs,
    rows: &[(CommittedBid, PrivateOutcome)],
) -> (MerkleDigest, MerkleTree) {
    vc_digest(rows.iter().map(|(b, o)| outcome_leaf(crs, b, o)).collect())
}

/// Runs the rules on the opened messages: bids of every non-seller entry,
/// joint coin `(⊕ r_j) ⊕ r_P`.
pub fn evaluate_rules(
    ctx: &RelationContext<'_>,
    messages: &[(Identity, &[u8])],
    platform_coin: &CoinString,
) -> Result<(AuctionOutcome, CoinString), String> {
    let mut coins = vec![platform_coin.clone()];
    let mut bids = Vec::new();
    for (id, m) in messages {
        let (value, coin) = BidMessage::interpret(m, *id, ctx.rules.domain(), ctx.coin_bytes);
        coins.push(coin);
        if let Some(v) = value {
            bids.push((*id, v));
        }
    }
    let joint = CoinString::xor_all(&coins).ok_or("coin lengths differ")?;
    let bids = BidVector::new(bids).map_err(|e| e.to_string())?;
    let outcome = ctx.rules.run(&bids, &joint).map_err(|e| e.to_string())?;
    Ok((outcome, joint))
}

pub fn check_relation(
    ctx: &RelationContext<'_>,
    statement: &RelationStatement,
    witness: &RelationWitness,
) -> Result<(), RelationFailure> {
    let crs = ctx.crs;
    let entries = &witness.entries;
    let ids: BTreeSet<Identity> = entries.iter().map(|e| e.bid.identity).collect();
    if entries.len() != statement.n || ids.len() != entries.len() {
        return fail(
            1,
            format!(
                "{} entries, {} distinct, n = {}",
                entries.len(),
                ids.len(),
                statement.n
            ),
        );
    }
    let bids: Vec<CommittedBid> = entries.iter().map(|e| e.bid.clone()).collect();
    if witness.code != encode_commitment_list(crs, &bids) {
        return fail(2, "code is not the encoding of the committed list");
    }
    if code_tree(&witness.code).0 != statement.digest {
        return fail(3, "digest does not commit to the code");
    }
    let rows: Vec<(CommittedBid, PrivateOutcome)> = entries
        .iter()
        .map(|e| (e.bid.clone(), e.outcome.clone()))
        .collect();
    if outcome_tree(crs, &rows).0 != statement.outcome_digest {
        return fail(4, "outcome digest does not commit to the outcome list");
    }
    if let Some(e) = entries
        .iter()
        .find(|e| !com_vf(crs, &e.bid.commitment, &e.bid.com_proof))
    {
        return fail(5, format!("commitment of {} is malformed", e.bid.identity));
    }
    for e in entries {
        let ok = match &e.opening {
            BidOpening::Direct(o) => dec_vf(crs, &e.bid.commitment, &e.message, o),
            BidOpening::Forced(p) => fdec_vf(crs, &e.bid.commitment, &e.message, p),
        };
        if !ok {
            return fail(6, format!("opening of {} does not verify", e.bid.identity));
        }
    }
    let messages: Vec<(Identity, &[u8])> = entries
        .iter()
        .map(|e| (e.bid.identity, e.message.as_slice()))
        .collect();
    let (outcome, _) = match evaluate_rules(ctx, &messages, &statement.platform_coin) {
        Ok(r) => r,
        Err(reason) => return fail(7, reason),
    };
    for e in entries {
        if outcome.private_outcome(e.bid.identity) != e.outcome {
            return fail(
                7,
                format!("outcome of {} differs from the rules", e.bid.identity),
            );
        }
    }
    Ok(())
}

/// Private outcomes for every entry, keyed by identity.
pub fn private_outcomes(
    outcome: &AuctionOutcome,
    ids: impl IntoIterator<Item = Identity>,
) -> BTreeMap<Identity, PrivateOutcome> {
    ids.into_iter()
        .map(|id| (id, outcome.private_outcome(id)))
        .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::crypto::nitc::{nitc_com, nitc_fdec};
    use crate::crypto::test_crs;
    use crate::mechanism::SecondPrice;
    use crate::rational::rat;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    pub(crate) fn rules() -> SecondPrice {
        SecondPrice::new(ValueDomain::grid(11).unwrap(), rat("0.2"), 1).unwrap()
    }

    /// Honest statement and witness for the given buyer values; the seller
    /// commits with identity 0.
    pub(crate) fn honest_instance(
        ctx: &RelationContext<'_>,
        values: &[&str],
        forced: &[u64],
        seed: u64,
    ) -> (RelationStatement, RelationWitness) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let domain = ctx.rules.domain();
        let mut raw = Vec::new();
        for (i, v) in std::iter::once(None)
            .chain(values.iter().map(|v| Some(rat(v))))
            .enumerate()
        {
            let id = Identity(i as u64);
            let coin = CoinString::random(ctx.coin_bytes * 8, &mut rng);
            let msg = BidMessage::new(id, v.as_ref(), domain, coin).to_bytes();
            let (cm, pi, opening) = nitc_com(ctx.crs, &msg, &mut rng).unwrap();
            let bid = CommittedBid {
                identity: id,
                commitment: cm,
                com_proof: pi,
            };
            let opening = if forced.contains(&(i as u64)) {
                BidOpening::Forced(
                    nitc_fdec(ctx.crs, &bid.commitment, &bid.com_proof)
                        .unwrap()
                        .proof,
                )
            } else {
                BidOpening::Direct(opening)
            };
            raw.push((bid, opening, msg));
        }
        let platform_coin = CoinString::random(ctx.coin_bytes * 8, &mut rng);
        let messages: Vec<(Identity, &[u8])> = raw
            .iter()
            .map(|(b, _, m)| (b.identity, m.as_slice()))
            .collect();
        let (outcome, _) = evaluate_rules(ctx, &messages, &platform_coin).unwrap();
        let bids: Vec<CommittedBid> = raw.iter().map(|(b, _, _)| b.clone()).collect();
        let code = encode_commitment_list(ctx.crs, &bids);
        let entries: Vec<WitnessEntry> = raw
            .into_iter()
            .map(|(bid, opening, message)| WitnessEntry {
                outcome: outcome.private_outcome(bid.identity),
                bid,
                opening,
                message,
            })
            .collect();
        let rows: Vec<_> = entries
            .iter()
            .map(|e| (e.bid.clone(), e.outcome.clone()))
            .collect();
        let statement = RelationStatement {
            digest: code_tree(&code).0,
            outcome_digest: outcome_tree(ctx.crs, &rows).0,
            n: entries.len(),
            platform_coin,
        };
        (statement, RelationWitness { code, entries })
    }

    #[test]
    fn honest_witness_satisfies() {
        let rules = rules();
        let ctx = RelationContext {
            crs: test_crs(),
            rules: &rules,
            coin_bytes: 16,
        };
        let (s, w) = honest_instance(&ctx, &["0.5", "0.3"], &[], 1);
        assert_eq!(check_relation(&ctx, &s, &w), Ok(()));
        let winner = w
            .entries
            .iter()
            .find(|e| e.bid.identity == Identity(1))
            .unwrap();
        assert_eq!(
            winner.outcome,
            PrivateOutcome::Buyer {
                allocated: true,
                payment: rat("0.35")
            }
        );
    }

    #[test]
    fn forced_opening_satisfies() {
        let rules = rules();
        let ctx = RelationContext {
            crs: test_crs(),
            rules: &rules,
            coin_bytes: 16,
        };
        let (s, w) = honest_instance(&ctx, &["0.5", "0.3"], &[2], 2);
        assert!(matches!(w.entries[2].opening, BidOpening::Forced(_)));
        assert_eq!(check_relation(&ctx, &s, &w), Ok(()));
    }

    #[test]
    fn duplicate_identity_fails_first_condition() {
        let rules = rules();
        let ctx = RelationContext {
            crs: test_crs(),
            rules: &rules,
            coin_bytes: 16,
        };
        let (mut s, mut w) = honest_instance(&ctx, &["0.5", "0.3"], &[], 3);
        let dup = w.entries[1].clone();
        w.entries.push(dup);
        s.n += 1;
        assert_eq!(check_relation(&ctx, &s, &w).unwrap_err().bullet, 1);
    }

    #[test]
    fn mutated_outcome_fails() {
        let rules = rules();
        let ctx = RelationContext {
            crs: test_crs(),
            rules: &rules,
            coin_bytes: 16,
        };
        let (s, mut w) = honest_instance(&ctx, &["0.5", "0.3"], &[], 4);
        w.entries[1].outcome = PrivateOutcome::Buyer {
            allocated: true,
            payment: rat("0.1"),
        };
        // the outcome digest no longer matches
        assert_eq!(check_relation(&ctx, &s, &w).unwrap_err().bullet, 4);
        // recommitting to the mutated list moves the failure to the last condition
        let rows: Vec<_> = w
            .entries
            .iter()
            .map(|e| (e.bid.clone(), e.outcome.clone()))
            .collect();
        let s2 = RelationStatement {
            outcome_digest: outcome_tree(ctx.crs, &rows).0,
            ..s
        };
        assert_eq!(check_relation(&ctx, &s2, &w).unwrap_err().bullet, 7);
    }

    #[test]
    fn wrong_message_fails_opening_check() {
        let rules = rules();
        let ctx = RelationContext {
            crs: test_crs(),
            rules: &rules,
            coin_bytes: 16,
        };
        let (s, mut w) = honest_instance(&ctx, &["0.5", "0.3"], &[], 5);
        let coin = CoinString::zeros(128);
        w.entries[2].message =
            BidMessage::new(Identity(2), Some(&rat("0.9")), rules.domain(), coin).to_bytes();
        assert_eq!(check_relation(&ctx, &s, &w).unwrap_err().bullet, 6);
    }

    #[test]
    fn bid_message_round_trip_and_fallbacks() {
        let d = ValueDomain::grid(11).unwrap();
        let coin = CoinString::from_bytes(vec![7; 4]);
        let m = BidMessage::new(Identity(3), Some(&rat("0.4")), &d, coin.clone());
        let bytes = m.to_bytes();
        assert_eq!(BidMessage::parse(&bytes, Identity(3), 4), Some(m));
        assert_eq!(
            BidMessage::interpret(&bytes, Identity(3), &d, 4),
            (Some(rat("0.4")), coin)
        );
        // identity mismatch reads as a null bid with the zero coin
        assert_eq!(
            BidMessage::interpret(&bytes, Identity(4), &d, 4),
            (None, CoinString::from_bytes(vec![0; 4]))
        );
        assert_eq!(BidMessage::interpret(b"junk", Identity(3), &d, 4).0, None);
    }
}
