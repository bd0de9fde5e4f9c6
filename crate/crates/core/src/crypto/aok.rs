//! Argument-of-knowledge interface for the outcome relation.
//!
//! The shipped backend is transparent: the proof is the witness itself and
//! verification re-runs the relation checker. It is sound and complete but
//! neither succinct nor zero-knowledge.

use super::encoding::{Hash256, Writer};
use super::relation::{
    check_relation, RelationContext, RelationFailure, RelationStatement, RelationWitness,
};

pub trait AokBackend {
    type Proof: Clone;

    fn prove(&self, statement: &RelationStatement, witness: &RelationWitness) -> Self::Proof;

    fn verify(&self, statement: &RelationStatement, proof: &Self::Proof) -> bool;

    /// Canonical bytes, used for transcripts and payload digests.
    fn proof_bytes(&self, proof: &Self::Proof) -> Vec<u8>;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransparentProof {
    pub statement_hash: Hash256,
    pub witness: RelationWitness,
}

pub struct TransparentAok<'a> {
    pub ctx: RelationContext<'a>,
}

impl<'a> TransparentAok<'a> {
    pub fn new(ctx: RelationContext<'a>) -> Self {
        TransparentAok { ctx }
    }

    /// Like [`AokBackend::verify`] but reports why verification failed.
    pub fn diagnose(
        &self,
        statement: &RelationStatement,
        proof: &TransparentProof,
    ) -> Result<(), RelationFailure> {
        if proof.statement_hash != statement.hash() {
            return Err(RelationFailure {
                bullet: 0,
                reason: "proof is for a different statement".into(),
            });
        }
        check_relation(&self.ctx, statement, &proof.witness)
    }
}

impl AokBackend for TransparentAok<'_> {
    type Proof = TransparentProof;

    fn prove(&self, statement: &RelationStatement, witness: &RelationWitness) -> TransparentProof {
        TransparentProof {
            statement_hash: statement.hash(),
            witness: witness.clone(),
        }
    }

    fn verify(&self, statement: &RelationStatement, proof: &TransparentProof) -> bool {
        self.diagnose(statement, proof).is_ok()
    }

    fn proof_bytes(&self, proof: &TransparentProof) -> Vec<u8> {
        Writer::new()
            .raw(&proof.statement_hash)
            .bytes(&proof.witness.to_bytes(self.ctx.crs))
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::relation::tests::{honest_instance, rules};
    use crate::crypto::relation::BidMessage;
    use crate::crypto::test_crs;
    use crate::mechanism::{CoinString, Identity};
    use crate::rational::rat;
    use crate::AuctionRules;

    #[test]
    fn complete_and_sound_on_mutation() {
        let rules = rules();
        let aok = TransparentAok::new(RelationContext {
            crs: test_crs(),
            rules: &rules,
            coin_bytes: 16,
        });
        let (s, w) = honest_instance(&aok.ctx, &["0.7", "0.4", "0.4"], &[], 11);
        let proof = aok.prove(&s, &w);
        assert!(aok.verify(&s, &proof));
        assert!(!aok.proof_bytes(&proof).is_empty());

        let mut bad = proof.clone();
        let coin = CoinString::zeros(128);
        bad.witness.entries[1].message =
            BidMessage::new(Identity(1), Some(&rat("0.1")), rules.domain(), coin).to_bytes();
        assert!(!aok.verify(&s, &bad));

        let mut other = s.clone();
        other.n += 1;
        assert_eq!(aok.diagnose(&other, &proof).unwrap_err().bullet, 0);
    }
}
