//! Merkle-tree vector commitments with per-index membership paths.

use super::encoding::{hash_parts, Hash256, Reader, Writer};
use super::CryptoError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MerkleDigest(pub Hash256);

impl MerkleDigest {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

/// The full tree, kept by the committer to answer queries.
#[derive(Clone, Debug)]
pub struct MerkleTree {
    leaves: Vec<Vec<u8>>,
    // levels[0] holds the padded leaf hashes, the last level the root
    levels: Vec<Vec<Hash256>>,
}

/// Sibling paths, one per queried index, in query order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MerkleProof {
    pub paths: Vec<Vec<Hash256>>,
}

impl MerkleProof {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u32(self.paths.len() as u32);
        for path in &self.paths {
            w.u32(path.len() as u32);
            for h in path {
                w.raw(h);
            }
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let mut r = Reader::new(bytes);
        let n = r.u32()? as usize;
        let mut paths = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            let depth = r.u32()? as usize;
            if depth > 64 {
                return Err(CryptoError::Decode("path deeper than 64"));
            }
            paths.push((0..depth).map(|_| r.hash()).collect::<Result<_, _>>()?);
        }
        r.finish()?;
        Ok(MerkleProof { paths })
    }
}

fn leaf_hash(payload: &[u8]) -> Hash256 {
    hash_parts("vc/leaf", &[payload])
}

fn empty_leaf() -> Hash256 {
    hash_parts("vc/empty", &[])
}

fn node_hash(left: &Hash256, right: &Hash256) -> Hash256 {
    hash_parts("vc/node", &[left, right])
}

fn root_digest(len: usize, root: &Hash256) -> MerkleDigest {
    MerkleDigest(hash_parts("vc/root", &[&(len as u64).to_be_bytes(), root]))
}

impl MerkleTree {
    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn leaf(&self, index: usize) -> Option<&[u8]> {
        self.leaves.get(index).map(Vec::as_slice)
    }

    pub fn digest(&self) -> MerkleDigest {
        let root = self.levels.last().expect("at least one level")[0];
        root_digest(self.leaves.len(), &root)
    }
}

pub fn vc_digest(vector: Vec<Vec<u8>>) -> (MerkleDigest, MerkleTree) {
    let width = vector.len().max(1).next_power_of_two();
    let mut level: Vec<Hash256> = vector.iter().map(|p| leaf_hash(p)).collect();
    level.resize(width, empty_leaf());
    let mut levels = vec![level];
    while levels.last().unwrap().len() > 1 {
        let next = levels
            .last()
            .unwrap()
            .chunks(2)
            .map(|pair| node_hash(&pair[0], &pair[1]))
            .collect();
        levels.push(next);
    }
    let tree = MerkleTree {
        leaves: vector,
        levels,
    };
    (tree.digest(), tree)
}

pub fn vc_open(tree: &MerkleTree, query: &[usize]) -> Result<MerkleProof, CryptoError> {
    let mut paths = Vec::with_capacity(query.len());
    for &index in query {
        if index >= tree.len() {
            return Err(CryptoError::IndexOutOfRange {
                index,
                len: tree.len(),
            });
        }
        let mut pos = index;
        let mut path = Vec::with_capacity(tree.levels.len() - 1);
        for level in &tree.levels[..tree.levels.len() - 1] {
            path.push(level[pos ^ 1]);
            pos >>= 1;
        }
        paths.push(path);
    }
    Ok(MerkleProof { paths })
}

/// Checks that `answers[j]` sits at position `query[j]` of the committed
/// vector of length `len`. An empty query verifies.
pub fn vc_vf(
    len: usize,
    digest: &MerkleDigest,
    query: &[usize],
    answers: &[Vec<u8>],
    proof: &MerkleProof,
) -> bool {
    if query.len() != answers.len() || query.len() != proof.paths.len() {
        return false;
    }
    let depth = len.max(1).next_power_of_two().trailing_zeros() as usize;
    for ((&index, answer), path) in query.iter().zip(answers).zip(&proof.paths) {
        if index >= len || path.len() != depth {
            return false;
        }
        let mut acc = leaf_hash(answer);
        let mut pos = index;
        for sibling in path {
            acc = if pos & 1 == 0 {
                node_hash(&acc, sibling)
            } else {
                node_hash(sibling, &acc)
            };
            pos >>= 1;
        }
        if root_digest(len, &acc) != *digest {
            return false;
        }
    }
    true
}
