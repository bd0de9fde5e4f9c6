//! The platform and bidder state machines. Each role is called once per
//! round with the messages addressed to it in the previous round.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_bigint::BigUint;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use super::adversary::Plan;
use super::messages::{chain_payload, Message};
use super::ProtocolConfig;
use crate::crypto::encoding::{hash_parts, Hash256};
use crate::crypto::relation::{
    code_tree, encode_commitment_list, evaluate_rules, outcome_leaf, outcome_tree, BidMessage,
};
use crate::crypto::{
    com_vf, dec_vf, nitc_com, nitc_fdec, por_challenge, por_respond, por_verify, vc_open, vc_vf,
    AokBackend, BidOpening, CommittedBid, MerkleDigest, MerkleProof, MerkleTree, NitcCrs, Opening,
    RelationStatement, RelationWitness, TransparentAok, TransparentProof, WitnessEntry,
};
use crate::mechanism::{AuctionOutcome, CoinString, Identity, PrivateOutcome};
use crate::rational::Rational;
use crate::trace::{ChainEntry, Decision, Party};

/// First identity used for the seller's shill bids.
pub(crate) const SHILL_BASE: u64 = 1 << 40;

pub(crate) enum Action {
    Send(Party, Message),
    Post(Vec<u8>),
}

pub(crate) struct Envelope {
    pub from: Party,
    pub to: Party,
    pub message: Message,
}

/// Shared, read-only context of one run.
pub(crate) struct Env<'a> {
    pub config: &'a ProtocolConfig,
    pub crs: &'a NitcCrs,
    pub aok: TransparentAok<'a>,
    pub players: Vec<Party>,
    // AoK verification is a pure function of statement and proof; players
    // that receive the same proof share the result.
    memo: RefCell<HashMap<Hash256, bool>>,
}

impl<'a> Env<'a> {
    pub fn new(
        config: &'a ProtocolConfig,
        crs: &'a NitcCrs,
        aok: TransparentAok<'a>,
        players: Vec<Party>,
    ) -> Self {
        Env {
            config,
            crs,
            aok,
            players,
            memo: RefCell::new(HashMap::new()),
        }
    }

    fn verify_aok(&self, statement: &RelationStatement, proof: &TransparentProof) -> bool {
        let key = hash_parts(
            "aok/memo",
            &[&statement.to_bytes(), &self.aok.proof_bytes(proof)],
        );
        if let Some(&ok) = self.memo.borrow().get(&key) {
            return ok;
        }
        let ok = self.aok.verify(statement, proof);
        self.memo.borrow_mut().insert(key, ok);
        ok
    }
}

pub(crate) fn party_rng(seed: u64, party: Party) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(b"party");
    h.update(seed.to_be_bytes());
    h.update(party.to_string().as_bytes());
    ChaCha20Rng::from_seed(h.finalize().into())
}

fn commit_bid(
    env: &Env<'_>,
    rng: &mut ChaCha20Rng,
    id: Identity,
    value: Option<&Rational>,
) -> (CommittedBid, Opening) {
    let coin = CoinString::random(env.config.coin_bits, rng);
    let msg = BidMessage::new(id, value, &env.config.domain, coin).to_bytes();
    let (commitment, com_proof, opening) =
        nitc_com(env.crs, &msg, rng).expect("bid message fits the commitment block");
    (
        CommittedBid {
            identity: id,
            commitment,
            com_proof,
        },
        opening,
    )
}

#[derive(Clone, Debug)]
struct ReceivedStatement {
    n: usize,
    digest: MerkleDigest,
    code_len: usize,
    platform_coin: CoinString,
}

/// A buyer or the seller.
pub(crate) struct Bidder {
    pub party: Party,
    inputs: Vec<(Identity, Option<Rational>)>,
    withhold: bool,
    garbage: bool,
    rng: ChaCha20Rng,
    own: Vec<(CommittedBid, Opening)>,
    suppressed: bool,
    statement: Option<ReceivedStatement>,
    conflicting_statements: bool,
    query: Option<Vec<usize>>,
    por_ok: bool,
    opened: bool,
    outcome_digest: Option<MerkleDigest>,
    aok_ok: bool,
    pub received: Option<PrivateOutcome>,
    outcome_ok: bool,
}

impl Bidder {
    pub fn buyer(id: Identity, value: Rational, seed: u64, plan: &Plan) -> Self {
        Bidder::new(
            Party::Buyer(id),
            vec![(id, Some(value))],
            plan.withhold.contains(&id),
            plan.garbage.contains(&id),
            seed,
        )
    }

    pub fn seller(seed: u64, plan: &Plan) -> Self {
        let mut inputs = vec![(Identity::SELLER, None)];
        for (j, v) in plan.shill_bids.iter().enumerate() {
            inputs.push((Identity(SHILL_BASE + j as u64), Some(v.clone())));
        }
        Bidder::new(Party::Seller, inputs, false, false, seed)
    }

    fn new(
        party: Party,
        inputs: Vec<(Identity, Option<Rational>)>,
        withhold: bool,
        garbage: bool,
        seed: u64,
    ) -> Self {
        Bidder {
            party,
            inputs,
            withhold,
            garbage,
            rng: party_rng(seed, party),
            own: Vec::new(),
            suppressed: false,
            statement: None,
            conflicting_statements: false,
            query: None,
            por_ok: false,
            opened: false,
            outcome_digest: None,
            aok_ok: false,
            received: None,
            outcome_ok: false,
        }
    }

    fn primary(&self) -> &CommittedBid {
        &self.own[0].0
    }

    fn relation_statement(&self) -> Option<RelationStatement> {
        let s = self.statement.as_ref()?;
        Some(RelationStatement {
            digest: s.digest,
            outcome_digest: self.outcome_digest?,
            n: s.n,
            platform_coin: s.platform_coin.clone(),
        })
    }

    fn read(&mut self, inbox: &[&Envelope], env: &Env<'_>) {
        for env_msg in inbox {
            if env_msg.from != Party::Platform {
                continue;
            }
            match &env_msg.message {
                Message::Suppressed(id) => {
                    if self.own.first().is_some_and(|b| b.0.identity == *id) {
                        self.suppressed = true;
                    }
                }
                Message::Statement {
                    n,
                    digest,
                    code_len,
                    platform_coin,
                } => {
                    if self.statement.is_some() {
                        self.conflicting_statements = true;
                    } else {
                        self.statement = Some(ReceivedStatement {
                            n: *n,
                            digest: *digest,
                            code_len: *code_len,
                            platform_coin: platform_coin.clone(),
                        });
                    }
                }
                Message::PorResponse { answers, proof } => {
                    if let (Some(s), Some(q)) = (&self.statement, &self.query) {
                        self.por_ok = por_verify(&s.digest, s.code_len, q, answers, proof);
                    }
                }
                Message::OutcomeDigest(d) => {
                    if self.outcome_digest.is_none() {
                        self.outcome_digest = Some(*d);
                    }
                }
                Message::Aok(proof) => {
                    if let Some(st) = self.relation_statement() {
                        self.aok_ok = env.verify_aok(&st, proof);
                    }
                }
                Message::Outcome {
                    identity,
                    outcome,
                    index,
                    proof,
                } => {
                    if *identity != self.primary().identity {
                        continue;
                    }
                    self.received = Some(outcome.clone());
                    self.outcome_ok = match (&self.statement, &self.outcome_digest) {
                        (Some(s), Some(d)) => vc_vf(
                            s.n,
                            d,
                            &[*index],
                            &[outcome_leaf(env.crs, self.primary(), outcome)],
                            proof,
                        ),
                        _ => false,
                    };
                }
                _ => {}
            }
        }
    }

    pub fn act(&mut self, round: u32, inbox: &[&Envelope], env: &Env<'_>) -> Vec<Action> {
        self.read(inbox, env);
        let d = env.config.deadlines;
        let mut out = Vec::new();
        if round == d.t1 {
            for (id, value) in self.inputs.clone() {
                let (mut bid, opening) = commit_bid(env, &mut self.rng, id, value.as_ref());
                if self.garbage {
                    bid.commitment.u = BigUint::one();
                }
                out.push(Action::Send(Party::Platform, Message::Commit(bid.clone())));
                self.own.push((bid, opening));
            }
        }
        if round == d.t2 && !self.suppressed {
            if let Some(s) = &self.statement {
                let kappa = env.config.kappa.min(s.code_len);
                if let Ok(q) = por_challenge(&mut self.rng, kappa, s.code_len) {
                    out.push(Action::Send(Party::Platform, Message::Challenge(q.clone())));
                    self.query = Some(q);
                }
            }
        }
        if round == d.t3
            && !self.suppressed
            && self.statement.is_some()
            && self.por_ok
            && !self.withhold
        {
            for (bid, opening) in &self.own {
                out.push(Action::Send(
                    Party::Platform,
                    Message::Opening {
                        identity: bid.identity,
                        opening: opening.clone(),
                    },
                ));
            }
            self.opened = true;
        }
        out
    }

    pub fn decide<'c>(&self, chain: impl Iterator<Item = &'c ChainEntry>) -> Decision {
        let reject = |r: &str| Decision::Reject(r.to_string());
        if self.suppressed {
            return reject("identity lost duplicate suppression");
        }
        if self.conflicting_statements {
            return reject("received conflicting statements");
        }
        let Some(statement) = self.relation_statement() else {
            return reject("statement or outcome digest missing");
        };
        if !self.por_ok {
            return reject("retrievability check failed");
        }
        if !self.aok_ok {
            return reject("argument of knowledge rejected");
        }
        if self.opened && !self.outcome_ok {
            return reject("no verifiable outcome");
        }
        let posts: Vec<&ChainEntry> = chain.filter(|e| e.author == Party::Platform).collect();
        if posts.iter().any(|e| e.payload == chain_payload(None)) {
            return reject("platform posted bottom");
        }
        match posts.as_slice() {
            [] => reject("nothing posted on chain"),
            [e] if e.payload == chain_payload(Some(&statement.to_bytes())) => Decision::Accept,
            _ => reject("chain disagrees with the received statement"),
        }
    }
}

struct Included {
    owner: Party,
    bid: CommittedBid,
}

pub(crate) struct Platform {
    rng: ChaCha20Rng,
    equivocate: Option<Party>,
    mutate: Option<(Identity, bool)>,
    drop: Option<Identity>,
    fake_bids: Vec<Rational>,
    coin_override: Option<CoinString>,
    fake_openings: BTreeMap<Identity, Opening>,
    entries: Vec<Included>,
    code: Vec<u32>,
    tree: Option<MerkleTree>,
    digest: Option<MerkleDigest>,
    coin: Option<CoinString>,
    direct: BTreeSet<Identity>,
    witness: Vec<WitnessEntry>,
    delivered: Vec<PrivateOutcome>,
    outcome_tree: Option<MerkleTree>,
    statement: Option<RelationStatement>,
    bottom: bool,
    pub outcome: Option<AuctionOutcome>,
    pub joint_coin: Option<CoinString>,
    pub notes: Vec<String>,
}

fn mutate_private(out: &PrivateOutcome, tick: &Rational) -> PrivateOutcome {
    match out {
        PrivateOutcome::Buyer { allocated, .. } => PrivateOutcome::Buyer {
            allocated: !allocated,
            payment: Rational::zero(),
        },
        PrivateOutcome::Seller {
            items_sold,
            revenue,
        } => PrivateOutcome::Seller {
            items_sold: *items_sold,
            revenue: revenue + tick,
        },
    }
}

fn mutate_outcome(outcome: &mut AuctionOutcome, id: Identity, tick: &Rational) {
    if id.is_seller() {
        outcome.seller_revenue = &outcome.seller_revenue + tick;
        outcome.platform_revenue = &outcome.platform_revenue - tick;
    } else {
        let now = !outcome.allocated(id);
        outcome.allocations.insert(id, now as u8);
        outcome.payments.insert(id, Rational::zero());
    }
}

impl Platform {
    pub fn new(seed: u64, plan: &Plan, coin_override: Option<CoinString>) -> Self {
        Platform {
            rng: party_rng(seed, Party::Platform),
            equivocate: plan.equivocate,
            mutate: plan.mutate,
            drop: plan.drop,
            fake_bids: plan.fake_bids.clone(),
            coin_override,
            fake_openings: BTreeMap::new(),
            entries: Vec::new(),
            code: Vec::new(),
            tree: None,
            digest: None,
            coin: None,
            direct: BTreeSet::new(),
            witness: Vec::new(),
            delivered: Vec::new(),
            outcome_tree: None,
            statement: None,
            bottom: false,
            outcome: None,
            joint_coin: None,
            notes: Vec::new(),
        }
    }

    pub fn act(&mut self, round: u32, inbox: &[&Envelope], env: &Env<'_>) -> Vec<Action> {
        let d = env.config.deadlines;
        if round == d.t1 + 1 {
            self.collect(inbox, env)
        } else if round == d.t2 + 1 {
            self.respond(inbox)
        } else if round == d.t3 + 1 {
            self.compute(inbox, env)
        } else if round == d.t3 + 2 {
            self.prove(env)
        } else if round == d.t3 + 3 {
            self.deliver()
        } else if round == d.t4 && !self.bottom {
            match &self.statement {
                Some(s) => vec![Action::Post(chain_payload(Some(&s.to_bytes())))],
                None => Vec::new(),
            }
        } else {
            Vec::new()
        }
    }

    /// Steps (b) and (c).
    fn collect(&mut self, inbox: &[&Envelope], env: &Env<'_>) -> Vec<Action> {
        let mut out = Vec::new();
        let mut tuples: Vec<(Party, CommittedBid)> = inbox
            .iter()
            .filter_map(|e| match &e.message {
                Message::Commit(bid) => Some((e.from, bid.clone())),
                _ => None,
            })
            .collect();
        let next_id = tuples.iter().map(|(_, b)| b.identity.0).max().unwrap_or(0) + 1;
        for (j, v) in self.fake_bids.clone().iter().enumerate() {
            let id = Identity(next_id + j as u64);
            let (bid, opening) = commit_bid(env, &mut self.rng, id, Some(v));
            self.fake_openings.insert(id, opening);
            tuples.push((Party::Platform, bid));
        }
        let mut by_id: BTreeMap<Identity, Vec<(Party, CommittedBid)>> = BTreeMap::new();
        for (from, bid) in tuples {
            if !com_vf(env.crs, &bid.commitment, &bid.com_proof) {
                self.notes
                    .push(format!("dropped malformed commitment from {from}"));
                continue;
            }
            if bid.identity.is_seller() && from != Party::Seller {
                self.notes
                    .push(format!("{from} may not use the seller identity"));
                continue;
            }
            by_id.entry(bid.identity).or_default().push((from, bid));
        }
        for (id, mut group) in by_id {
            if group.len() > 1 {
                let keep = self.rng.gen_range(0..group.len());
                let kept = group.swap_remove(keep);
                for (from, _) in group {
                    out.push(Action::Send(from, Message::Suppressed(id)));
                }
                self.notes
                    .push(format!("identity {id} submitted more than once"));
                group = vec![kept];
            }
            let (owner, bid) = group.pop().expect("nonempty group");
            if Some(id) == self.drop {
                self.notes.push(format!("left out the tuple of {id}"));
                continue;
            }
            self.entries.push(Included { owner, bid });
        }
        let bids: Vec<CommittedBid> = self.entries.iter().map(|e| e.bid.clone()).collect();
        self.code = encode_commitment_list(env.crs, &bids);
        let (digest, tree) = code_tree(&self.code);
        let coin = self
            .coin_override
            .clone()
            .unwrap_or_else(|| CoinString::random(env.config.coin_bits, &mut self.rng));
        for p in &env.players {
            let mut platform_coin = coin.clone();
            if Some(*p) == self.equivocate {
                let mut bytes = coin.as_bytes().to_vec();
                bytes[0] ^= 1;
                platform_coin = CoinString::from_bytes(bytes);
            }
            out.push(Action::Send(
                *p,
                Message::Statement {
                    n: self.entries.len(),
                    digest,
                    code_len: self.code.len(),
                    platform_coin,
                },
            ));
        }
        self.tree = Some(tree);
        self.digest = Some(digest);
        self.coin = Some(coin);
        out
    }

    /// Retrievability responses.
    fn respond(&mut self, inbox: &[&Envelope]) -> Vec<Action> {
        let Some(tree) = &self.tree else {
            return Vec::new();
        };
        inbox
            .iter()
            .filter_map(|e| match &e.message {
                Message::Challenge(q) => {
                    let (answers, proof) = por_respond(tree, q)
                        .unwrap_or_else(|_| (Vec::new(), MerkleProof::default()));
                    Some(Action::Send(
                        e.from,
                        Message::PorResponse { answers, proof },
                    ))
                }
                _ => None,
            })
            .collect()
    }

    /// Steps (f) and (g).
    fn compute(&mut self, inbox: &[&Envelope], env: &Env<'_>) -> Vec<Action> {
        if self.tree.is_none() {
            return Vec::new();
        }
        let mut openings: BTreeMap<Identity, Opening> = std::mem::take(&mut self.fake_openings);
        for e in inbox {
            if let Message::Opening { identity, opening } = &e.message {
                if self
                    .entries
                    .iter()
                    .any(|x| x.bid.identity == *identity && x.owner == e.from)
                {
                    openings.entry(*identity).or_insert_with(|| opening.clone());
                }
            }
        }
        let mut witness = Vec::new();
        for inc in &self.entries {
            let cm = &inc.bid.commitment;
            let direct = openings
                .get(&inc.bid.identity)
                .filter(|o| dec_vf(env.crs, cm, &o.message, o));
            let (opening, message) = match direct {
                Some(o) => {
                    self.direct.insert(inc.bid.identity);
                    (BidOpening::Direct(o.clone()), o.message.clone())
                }
                None => match nitc_fdec(env.crs, cm, &inc.bid.com_proof) {
                    Ok(f) => {
                        self.notes
                            .push(format!("forced opening of {}", inc.bid.identity));
                        (BidOpening::Forced(f.proof), f.message)
                    }
                    Err(e) => {
                        self.notes.push(format!(
                            "forced opening of {} failed: {e}",
                            inc.bid.identity
                        ));
                        self.bottom = true;
                        return vec![Action::Post(chain_payload(None))];
                    }
                },
            };
            witness.push(WitnessEntry {
                bid: inc.bid.clone(),
                opening,
                message,
                outcome: PrivateOutcome::Seller {
                    items_sold: 0,
                    revenue: Rational::zero(),
                },
            });
        }
        let messages: Vec<(Identity, &[u8])> = witness
            .iter()
            .map(|w| (w.bid.identity, w.message.as_slice()))
            .collect();
        let ctx = env.aok.ctx;
        let coin = self.coin.clone().expect("coin drawn in step (c)");
        let (mut outcome, joint) = match evaluate_rules(&ctx, &messages, &coin) {
            Ok(r) => r,
            Err(e) => {
                self.notes.push(format!("rules failed: {e}"));
                self.bottom = true;
                return vec![Action::Post(chain_payload(None))];
            }
        };
        for w in &mut witness {
            w.outcome = outcome.private_outcome(w.bid.identity);
        }
        self.delivered = witness.iter().map(|w| w.outcome.clone()).collect();
        if let Some((target, recommit)) = self.mutate {
            let tick = env.config.domain.tick();
            if let Some(j) = witness.iter().position(|w| w.bid.identity == target) {
                let changed = mutate_private(&witness[j].outcome, &tick);
                self.delivered[j] = changed.clone();
                if recommit {
                    witness[j].outcome = changed;
                }
                mutate_outcome(&mut outcome, target, &tick);
                self.notes.push(format!("changed the outcome of {target}"));
            }
        }
        let rows: Vec<(CommittedBid, PrivateOutcome)> = witness
            .iter()
            .map(|w| (w.bid.clone(), w.outcome.clone()))
            .collect();
        let (outcome_digest, tree) = outcome_tree(env.crs, &rows);
        self.statement = Some(RelationStatement {
            digest: self.digest.expect("digest computed in step (c)"),
            outcome_digest,
            n: witness.len(),
            platform_coin: coin,
        });
        self.outcome_tree = Some(tree);
        self.witness = witness;
        self.outcome = Some(outcome);
        self.joint_coin = Some(joint);
        env.players
            .iter()
            .map(|p| Action::Send(*p, Message::OutcomeDigest(outcome_digest)))
            .collect()
    }

    /// Step (h).
    fn prove(&mut self, env: &Env<'_>) -> Vec<Action> {
        let Some(statement) = &self.statement else {
            return Vec::new();
        };
        let witness = RelationWitness {
            code: self.code.clone(),
            entries: self.witness.clone(),
        };
        let proof = env.aok.prove(statement, &witness);
        env.players
            .iter()
            .map(|p| Action::Send(*p, Message::Aok(proof.clone())))
            .collect()
    }

    /// Step (i): outcomes go to the players whose own openings verified.
    fn deliver(&mut self) -> Vec<Action> {
        let Some(tree) = &self.outcome_tree else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for (j, inc) in self.entries.iter().enumerate() {
            if inc.owner == Party::Platform || !self.direct.contains(&inc.bid.identity) {
                continue;
            }
            let proof = vc_open(tree, &[j]).expect("index inside the outcome vector");
            out.push(Action::Send(
                inc.owner,
                Message::Outcome {
                    identity: inc.bid.identity,
                    outcome: self.delivered[j].clone(),
                    index: j,
                    proof,
                },
            ));
        }
        out
    }

    pub fn posted_bottom(&self) -> bool {
        self.bottom
    }
}
