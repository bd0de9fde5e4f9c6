//! Spot-check retrievability: open `κ` random positions of a committed codeword.

use rand::RngCore;

use super::vc::{vc_open, vc_vf, MerkleDigest, MerkleProof, MerkleTree};
use super::CryptoError;

pub const DEFAULT_KAPPA: usize = 64;

/// `κ` distinct uniform indices below `len`, sorted.
pub fn por_challenge<R: RngCore + ?Sized>(
    rng: &mut R,
    kappa: usize,
    len: usize,
) -> Result<Vec<usize>, CryptoError> {
    if kappa > len {
        return Err(CryptoError::ChallengeTooLarge { kappa, len });
    }
    let mut q = rand::seq::index::sample(rng, len, kappa).into_vec();
    q.sort_unstable();
    Ok(q)
}

pub fn por_respond(
    tree: &MerkleTree,
    query: &[usize],
) -> Result<(Vec<Vec<u8>>, MerkleProof), CryptoError> {
    let proof = vc_open(tree, query)?;
    let answers = query
        .iter()
        .map(|&i| tree.leaf(i).expect("index checked by vc_open").to_vec())
        .collect();
    Ok((answers, proof))
}

pub fn por_verify(
    digest: &MerkleDigest,
    len: usize,
    query: &[usize],
    answers: &[Vec<u8>],
    proof: &MerkleProof,
) -> bool {
    vc_vf(len, digest, query, answers, proof)
}
