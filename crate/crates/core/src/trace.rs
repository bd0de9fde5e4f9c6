//! Execution traces, the broadcast log, and their JSON Lines export.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::mechanism::{AuctionOutcome, CoinString, Identity, PrivateOutcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Party {
    Platform,
    Seller,
    Buyer(Identity),
}

impl Party {
    pub fn identity(self) -> Option<Identity> {
        match self {
            Party::Platform => None,
            Party::Seller => Some(Identity::SELLER),
            Party::Buyer(id) => Some(id),
        }
    }

    pub fn from_identity(id: Identity) -> Party {
        if id.is_seller() {
            Party::Seller
        } else {
            Party::Buyer(id)
        }
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::Platform => write!(f, "platform"),
            Party::Seller => write!(f, "seller"),
            Party::Buyer(id) => write!(f, "buyer:{id}"),
        }
    }
}

impl Serialize for Party {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Party {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        match s.as_str() {
            "platform" => Ok(Party::Platform),
            "seller" => Ok(Party::Seller),
            other => other
                .strip_prefix("buyer:")
                .and_then(|n| n.parse().ok())
                .map(|n| Party::Buyer(Identity(n)))
                .ok_or_else(|| serde::de::Error::custom(format!("unknown party {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Recipient {
    To(Party),
    Broadcast,
}

impl fmt::Display for Recipient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Recipient::To(p) => p.fmt(f),
            Recipient::Broadcast => write!(f, "broadcast"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MessageRecord {
    pub round: u32,
    pub from: Party,
    pub to: Recipient,
    pub step: String,
    pub payload: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainEntry {
    pub round: u32,
    pub author: Party,
    #[serde(with = "hex_payload")]
    pub payload: Vec<u8>,
}

mod hex_payload {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        hex::decode(String::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// Append-only broadcast log readable by every player.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Blockchain {
    entries: Vec<ChainEntry>,
}

impl Blockchain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn post(&mut self, round: u32, author: Party, payload: Vec<u8>) {
        self.entries.push(ChainEntry {
            round,
            author,
            payload,
        });
    }

    pub fn entries(&self) -> &[ChainEntry] {
        &self.entries
    }

    /// Entries visible at `round`: anything posted in an earlier round.
    pub fn visible_at(&self, round: u32) -> impl Iterator<Item = &ChainEntry> {
        self.entries.iter().filter(move |e| e.round < round)
    }

    pub fn posts_by(&self, author: Party) -> impl Iterator<Item = &ChainEntry> {
        self.entries.iter().filter(move |e| e.author == author)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", content = "reason", rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Reject(String),
}

impl Decision {
    pub fn is_accept(&self) -> bool {
        matches!(self, Decision::Accept)
    }
}

/// Full record of one protocol run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExecutionTrace {
    pub messages: Vec<MessageRecord>,
    pub decisions: BTreeMap<Party, Decision>,
    pub private_outcomes: BTreeMap<Party, PrivateOutcome>,
    /// Outcome as computed by the platform, if it got that far.
    pub outcome: Option<AuctionOutcome>,
    pub honest: BTreeSet<Party>,
    pub chain: Blockchain,
    /// Joint coin the rules were run with.
    pub joint_coin: Option<CoinString>,
    pub notes: Vec<String>,
}

impl ExecutionTrace {
    pub fn record(&mut self, round: u32, from: Party, to: Recipient, step: &str, payload: Vec<u8>) {
        self.messages.push(MessageRecord {
            round,
            from,
            to,
            step: step.to_string(),
            payload,
        });
    }

    pub fn decide(&mut self, party: Party, decision: Decision) {
        self.decisions.insert(party, decision);
    }

    pub fn decision(&self, party: Party) -> Option<&Decision> {
        self.decisions.get(&party)
    }

    /// Every honest player accepted.
    pub fn is_safe(&self) -> bool {
        self.honest
            .iter()
            .all(|p| self.decisions.get(p).is_some_and(Decision::is_accept))
    }

    pub fn honest_buyers(&self) -> impl Iterator<Item = Identity> + '_ {
        self.honest.iter().filter_map(|p| match p {
            Party::Buyer(id) => Some(*id),
            _ => None,
        })
    }

    /// JSON Lines: one record per message, then a trailer line.
    pub fn to_jsonl(&self, full: bool) -> String {
        let mut out = String::new();
        for m in &self.messages {
            let mut rec = serde_json::json!({
                "round": m.round,
                "from": m.from.to_string(),
                "to": m.to.to_string(),
                "step": m.step,
                "payload_digest": hex::encode(Sha256::digest(&m.payload)),
            });
            if full {
                rec["payload"] = serde_json::Value::String(hex::encode(&m.payload));
            }
            out.push_str(&rec.to_string());
            out.push('\n');
        }
        let decisions: BTreeMap<String, &Decision> = self
            .decisions
            .iter()
            .map(|(p, d)| (p.to_string(), d))
            .collect();
        let trailer = serde_json::json!({
            "decisions": decisions,
            "outcome": self.outcome,
            "safe": self.is_safe(),
        });
        out.push_str(&trailer.to_string());
        out.push('\n');
        out
    }
}

/// Parsed form of an exported trace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceExport {
    pub records: Vec<ExportedMessage>,
    pub decisions: BTreeMap<Party, Decision>,
    pub outcome: Option<AuctionOutcome>,
    pub safe: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
pub struct ExportedMessage {
    pub round: u32,
    pub from: String,
    pub to: String,
    pub step: String,
    pub payload_digest: String,
    #[serde(default)]
    pub payload: Option<String>,
}

#[derive(Deserialize)]
struct Trailer {
    decisions: BTreeMap<Party, Decision>,
    outcome: Option<AuctionOutcome>,
    safe: bool,
}

pub fn parse_jsonl(text: &str) -> Result<TraceExport, serde_json::Error> {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let (last, body) = lines
        .split_last()
        .ok_or_else(|| serde::de::Error::custom("empty trace"))?;
    let records = body
        .iter()
        .map(|l| serde_json::from_str(l))
        .collect::<Result<Vec<ExportedMessage>, _>>()?;
    let trailer: Trailer = serde_json::from_str(last)?;
    Ok(TraceExport {
        records,
        decisions: trailer.decisions,
        outcome: trailer.outcome,
        safe: trailer.safe,
    })
}
