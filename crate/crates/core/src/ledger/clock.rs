use std::collections::HashMap;

use sha2::{Digest, Sha256};

use crate::Hash32;

/// Hash-chained block counter standing in for a blockchain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainClock {
    gamma: u64,
    hashes: Vec<Hash32>,
    heights: HashMap<Hash32, u64>,
}

fn block_hash(height: u64, parent: &Hash32) -> Hash32 {
    let mut h = Sha256::new();
    h.update(height.to_be_bytes());
    h.update(parent);
    h.finalize().into()
}

impl ChainClock {
    pub fn new(gamma: u64) -> Self {
        let genesis = block_hash(0, &[0; 32]);
        ChainClock {
            gamma,
            hashes: vec![genesis],
            heights: HashMap::from([(genesis, 0)]),
        }
    }

    pub fn height(&self) -> u64 {
        self.hashes.len() as u64 - 1
    }

    pub fn hash(&self) -> Hash32 {
        *self.hashes.last().unwrap()
    }

    pub fn gamma(&self) -> u64 {
        self.gamma
    }

    /// Seconds elapsed since genesis.
    pub fn time(&self) -> u64 {
        self.height() * self.gamma
    }

    pub fn advance(&mut self, blocks: u64) {
        for _ in 0..blocks {
            let next = block_hash(self.height() + 1, &self.hash());
            self.heights.insert(next, self.height() + 1);
            self.hashes.push(next);
        }
    }

    pub fn height_of(&self, hash: &Hash32) -> Option<u64> {
        self.heights.get(hash).copied()
    }

    pub fn hash_at(&self, height: u64) -> Option<Hash32> {
        self.hashes.get(height as usize).copied()
    }

    /// Hashes of the current block and the `depth` blocks before it.
    pub fn recent(&self, depth: u64) -> impl Iterator<Item = Hash32> + '_ {
        let start = self.height().saturating_sub(depth) as usize;
        self.hashes[start..].iter().copied()
    }
}
