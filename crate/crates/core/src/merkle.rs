//! Binary SHA-256 Merkle tree with membership proofs.
//!
//! Parents are `hash(left || right)`. A node without a right neighbour is
//! paired with itself, so every proof in an `n`-leaf tree has exactly
//! `ceil(log2 n)` steps.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{hash_parts, Digest32};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MerkleError {
    #[error("a Merkle tree needs at least one leaf")]
    Empty,
    #[error("leaf index {index} out of range for {leaf_count} leaves")]
    IndexOutOfRange { index: usize, leaf_count: usize },
}

/// Which side of the running hash a sibling sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AuthPath {
    pub siblings: Vec<(Digest32, Side)>,
}

impl AuthPath {
    pub fn len(&self) -> usize {
        self.siblings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.siblings.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MerkleTree {
    /// `levels[0]` are the leaves, the last level holds only the root.
    levels: Vec<Vec<Digest32>>,
}

fn parent(left: &Digest32, right: &Digest32) -> Digest32 {
    hash_parts(&[left.as_bytes(), right.as_bytes()])
}

impl MerkleTree {
    pub fn build(leaves: Vec<Digest32>) -> Result<Self, MerkleError> {
        if leaves.is_empty() {
            return Err(MerkleError::Empty);
        }
        let mut levels = vec![leaves];
        while levels.last().map_or(0, Vec::len) > 1 {
            let below = levels.last().expect("non-empty");
            let next = below
                .chunks(2)
                .map(|pair| parent(&pair[0], pair.get(1).unwrap_or(&pair[0])))
                .collect();
            levels.push(next);
        }
        Ok(Self { levels })
    }

    pub fn leaves(&self) -> &[Digest32] {
        &self.levels[0]
    }

    pub fn leaf_count(&self) -> usize {
        self.levels[0].len()
    }

    pub fn levels(&self) -> &[Vec<Digest32>] {
        &self.levels
    }

    pub fn root(&self) -> Digest32 {
        self.levels.last().expect("at least one level")[0]
    }

    pub fn prove(&self, index: usize) -> Result<AuthPath, MerkleError> {
        let leaf_count = self.leaf_count();
        if index >= leaf_count {
            return Err(MerkleError::IndexOutOfRange { index, leaf_count });
        }
        let mut idx = index;
        let mut siblings = Vec::with_capacity(self.levels.len() - 1);
        for level in &self.levels[..self.levels.len() - 1] {
            let sibling = if idx.is_multiple_of(2) {
                (*level.get(idx + 1).unwrap_or(&level[idx]), Side::Right)
            } else {
                (level[idx - 1], Side::Left)
            };
            siblings.push(sibling);
            idx /= 2;
        }
        Ok(AuthPath { siblings })
    }
}

pub fn merkle_build(leaves: Vec<Digest32>) -> Result<MerkleTree, MerkleError> {
    MerkleTree::build(leaves)
}

pub fn merkle_root(tree: &MerkleTree) -> Digest32 {
    tree.root()
}

pub fn merkle_prove(tree: &MerkleTree, index: usize) -> Result<AuthPath, MerkleError> {
    tree.prove(index)
}

/// Checks that `leaf` sits at `index` under `root`. The side flags must agree
/// with the bits of `index`, so a valid proof cannot be replayed for another
/// position.
pub fn merkle_verify(root: &Digest32, leaf: &Digest32, index: usize, path: &AuthPath) -> bool {
    let mut node = *leaf;
    let mut idx = index;
    for (sibling, side) in &path.siblings {
        let expected = if idx.is_multiple_of(2) { Side::Right } else { Side::Left };
        if *side != expected {
            return false;
        }
        node = match side {
            Side::Right => parent(&node, sibling),
            Side::Left => parent(sibling, &node),
        };
        idx /= 2;
    }
    idx == 0 && node == *root
}

/// `ceil(log2 n)` for `n >= 1`.
pub fn expected_path_len(leaf_count: usize) -> usize {
    assert!(leaf_count >= 1);
    (usize::BITS - (leaf_count - 1).leading_zeros()) as usize
}
