use crate::crypto::encoding::Writer;
use crate::crypto::relation::CommittedBid;
use crate::crypto::{
    AokBackend, MerkleDigest, MerkleProof, NitcCrs, Opening, TransparentAok, TransparentProof,
};
use crate::mechanism::{CoinString, Identity, PrivateOutcome};

/// Point-to-point protocol messages.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    /// (a) `(i, c_i, π_i^com)`.
    Commit(CommittedBid),
    /// (b) the tuple for this identity lost duplicate suppression.
    Suppressed(Identity),
    /// (c) `(n, digest, r_P)`; the code length lets players bound challenges.
    Statement {
        n: usize,
        digest: MerkleDigest,
        code_len: usize,
        platform_coin: CoinString,
    },
    /// (d) retrievability challenge.
    Challenge(Vec<usize>),
    PorResponse {
        answers: Vec<Vec<u8>>,
        proof: MerkleProof,
    },
    /// (e) opening of one of the sender's commitments.
    Opening {
        identity: Identity,
        opening: Opening,
    },
    /// (g) `digest′`.
    OutcomeDigest(MerkleDigest),
    /// (h)
    Aok(TransparentProof),
    /// (i) `out_i` with its membership proof against `digest′`.
    Outcome {
        identity: Identity,
        outcome: PrivateOutcome,
        index: usize,
        proof: MerkleProof,
    },
}

impl Message {
    pub fn step(&self) -> &'static str {
        match self {
            Message::Commit(_) => "commit",
            Message::Suppressed(_) => "suppressed",
            Message::Statement { .. } => "statement",
            Message::Challenge(_) => "por-challenge",
            Message::PorResponse { .. } => "por-response",
            Message::Opening { .. } => "opening",
            Message::OutcomeDigest(_) => "outcome-digest",
            Message::Aok(_) => "aok",
            Message::Outcome { .. } => "outcome",
        }
    }

    /// Canonical payload bytes for the trace.
    pub fn to_bytes(&self, aok: &TransparentAok<'_>, crs: &NitcCrs) -> Vec<u8> {
        let mut w = Writer::new();
        match self {
            Message::Commit(bid) => w.raw(&bid.to_bytes(crs)),
            Message::Suppressed(id) => w.u64(id.0),
            Message::Statement {
                n,
                digest,
                code_len,
                platform_coin,
            } => w
                .raw(&digest.0)
                .u64(*n as u64)
                .u64(*code_len as u64)
                .bytes(platform_coin.as_bytes()),
            Message::Challenge(q) => {
                w.u32(q.len() as u32);
                for i in q {
                    w.u64(*i as u64);
                }
                &mut w
            }
            Message::PorResponse { answers, proof } => {
                w.u32(answers.len() as u32);
                for a in answers {
                    w.bytes(a);
                }
                w.bytes(&proof.to_bytes())
            }
            Message::Opening { identity, opening } => w.u64(identity.0).raw(&opening.to_bytes()),
            Message::OutcomeDigest(d) => w.raw(&d.0),
            Message::Aok(proof) => w.raw(&aok.proof_bytes(proof)),
            Message::Outcome {
                identity,
                outcome,
                index,
                proof,
            } => w
                .u64(identity.0)
                .bytes(&outcome.to_bytes())
                .u64(*index as u64)
                .bytes(&proof.to_bytes()),
        };
        w.finish()
    }
}

/// Blockchain payload: either `⊥` or the final statement bytes.
pub(crate) fn chain_payload(statement: Option<&[u8]>) -> Vec<u8> {
    match statement {
        None => vec![0],
        Some(s) => {
            let mut v = vec![1];
            v.extend_from_slice(s);
            v
        }
    }
}
