use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use super::hash::h_tree;
use super::keys::{aggregate_key, AggregatedKey, KeyList, PublicKey, POINT_LEN};
use super::MuSigError;
use crate::{Hash32, Percent};

const LEAF: u8 = 0x00;
const NODE: u8 = 0x01;

fn check_threshold(zeta: Percent) -> Result<(), MuSigError> {
    if zeta < Percent::from_whole(50) || zeta >= Percent::from_whole(100) {
        return Err(MuSigError::ThresholdOutOfRange(zeta));
    }
    Ok(())
}

/// `sum_{k=m}^{n} C(n, k)` with `m = ceil(zeta * n / 100)`.
pub fn combination_count(n: usize, zeta: Percent) -> Result<BigUint, MuSigError> {
    check_threshold(zeta)?;
    let m = zeta.min_count_of(n);
    let mut total = BigUint::zero();
    // C(n, k) built incrementally from C(n, m)
    let mut c = binomial(n, m);
    for k in m..=n {
        total += &c;
        c = c * BigUint::from(n - k) / BigUint::from(k + 1);
    }
    Ok(total)
}

fn binomial(n: usize, k: usize) -> BigUint {
    let k = k.min(n - k);
    let mut c = BigUint::one();
    for i in 0..k {
        c = c * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    c
}

/// Every permitted cosigner subset as sorted positions into the member list:
/// subsets of size `m` first, then `m + 1`, up to `n`; lexicographic within a
/// size.
pub fn combination_subsets(n: usize, zeta: Percent) -> Result<Vec<Vec<usize>>, MuSigError> {
    check_threshold(zeta)?;
    if n == 0 {
        return Err(MuSigError::EmptyKeyList);
    }
    let m = zeta.min_count_of(n).max(1);
    let mut out = Vec::new();
    for k in m..=n {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            out.push(idx.clone());
            // rightmost position that can still advance
            let mut i = k;
            while i > 0 && idx[i - 1] == n - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    Ok(out)
}

/// Aggregated keys of every permitted subset of `members`, in
/// [`combination_subsets`] order.
pub fn threshold_combinations(
    members: &KeyList,
    zeta: Percent,
) -> Result<Vec<AggregatedKey>, MuSigError> {
    combination_subsets(members.len(), zeta)?
        .iter()
        .map(|subset| aggregate_key(&members.select(subset)?))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Sibling sits to the left of the running hash.
    Left,
    /// Sibling sits to the right of the running hash.
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProofStep {
    pub sibling: Hash32,
    pub side: Side,
}

/// Authentication path from one leaf to the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MerkleProof {
    pub leaf_index: u32,
    pub path: Vec<ProofStep>,
}

impl MerkleProof {
    /// 4-byte big-endian leaf index, then per step one side byte (0 = left,
    /// 1 = right) and the 32-byte sibling.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + self.path.len() * 33);
        out.extend_from_slice(&self.leaf_index.to_be_bytes());
        for step in &self.path {
            out.push(match step.side {
                Side::Left => 0,
                Side::Right => 1,
            });
            out.extend_from_slice(&step.sibling);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, MuSigError> {
        if bytes.len() < 4 || !(bytes.len() - 4).is_multiple_of(33) {
            return Err(MuSigError::MalformedProof);
        }
        let leaf_index = u32::from_be_bytes(bytes[..4].try_into().unwrap());
        let path = bytes[4..]
            .chunks_exact(33)
            .map(|c| {
                let side = match c[0] {
                    0 => Side::Left,
                    1 => Side::Right,
                    _ => return Err(MuSigError::MalformedProof),
                };
                Ok(ProofStep {
                    sibling: c[1..].try_into().unwrap(),
                    side,
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(MerkleProof { leaf_index, path })
    }

    pub fn encoded_len(&self) -> usize {
        4 + self.path.len() * 33
    }
}

impl serde::Serialize for MerkleProof {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.to_bytes()))
    }
}

impl<'de> serde::Deserialize<'de> for MerkleProof {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let s = String::deserialize(d)?;
        let bytes = hex::decode(&s).map_err(D::Error::custom)?;
        MerkleProof::from_bytes(&bytes).map_err(D::Error::custom)
    }
}

fn leaf_hash(key: &PublicKey) -> Hash32 {
    h_tree(&[&[LEAF], &key.to_bytes()])
}

fn node_hash(left: &Hash32, right: &Hash32) -> Hash32 {
    h_tree(&[&[NODE], left, right])
}

/// Complete binary Merkle tree over aggregated keys. The last leaf is repeated
/// until the leaf count is a power of two.
#[derive(Debug, Clone)]
pub struct CombinationMerkleTree {
    threshold_m: usize,
    total_n: usize,
    leaves: Vec<AggregatedKey>,
    /// `levels[0]` holds the padded leaf hashes, the last level the root.
    levels: Vec<Vec<Hash32>>,
    index: HashMap<[u8; POINT_LEN], usize>,
}

impl CombinationMerkleTree {
    /// Enumerates and aggregates every permitted subset of `members`, then
    /// builds the tree.
    pub fn for_members(members: &KeyList, zeta: Percent) -> Result<Self, MuSigError> {
        let combos = threshold_combinations(members, zeta)?;
        let mut tree = build_tree(combos)?;
        tree.threshold_m = zeta.min_count_of(members.len()).max(1);
        tree.total_n = members.len();
        Ok(tree)
    }

    pub fn root(&self) -> Hash32 {
        self.levels.last().expect("at least one level")[0]
    }

    pub fn leaves(&self) -> &[AggregatedKey] {
        &self.leaves
    }

    pub fn padded_leaf_count(&self) -> usize {
        self.levels[0].len()
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn threshold_m(&self) -> usize {
        self.threshold_m
    }

    pub fn total_n(&self) -> usize {
        self.total_n
    }

    /// Number of stored hashes across all levels, padded nodes included.
    pub fn node_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn position(&self, key: &PublicKey) -> Option<usize> {
        self.index.get(&key.to_bytes()).copied()
    }

    pub fn proof_for_index(&self, leaf_index: usize) -> MerkleProof {
        let mut path = Vec::with_capacity(self.depth());
        let mut i = leaf_index;
        for level in &self.levels[..self.levels.len() - 1] {
            let step = if i.is_multiple_of(2) {
                ProofStep {
                    sibling: level[i + 1],
                    side: Side::Right,
                }
            } else {
                ProofStep {
                    sibling: level[i - 1],
                    side: Side::Left,
                }
            };
            path.push(step);
            i /= 2;
        }
        MerkleProof {
            leaf_index: leaf_index as u32,
            path,
        }
    }
}

/// Builds the tree over `aggkeys` in the given order.
pub fn build_tree(aggkeys: Vec<AggregatedKey>) -> Result<CombinationMerkleTree, MuSigError> {
    if aggkeys.is_empty() {
        return Err(MuSigError::EmptyTree);
    }
    let mut level: Vec<Hash32> = aggkeys.iter().map(|k| leaf_hash(k.point())).collect();
    let padded = level.len().next_power_of_two();
    let last = *level.last().unwrap();
    level.resize(padded, last);
    let mut levels = vec![level];
    while levels.last().unwrap().len() > 1 {
        let next = levels
            .last()
            .unwrap()
            .chunks_exact(2)
            .map(|p| node_hash(&p[0], &p[1]))
            .collect();
        levels.push(next);
    }
    let mut index = HashMap::with_capacity(aggkeys.len());
    for (i, k) in aggkeys.iter().enumerate() {
        index.entry(k.point().to_bytes()).or_insert(i);
    }
    let total_n = aggkeys.iter().map(|k| k.source().len()).max().unwrap_or(0);
    let threshold_m = aggkeys.iter().map(|k| k.source().len()).min().unwrap_or(0);
    Ok(CombinationMerkleTree {
        threshold_m,
        total_n,
        leaves: aggkeys,
        levels,
        index,
    })
}

pub fn prove_membership(
    tree: &CombinationMerkleTree,
    aggkey: &PublicKey,
) -> Result<MerkleProof, MuSigError> {
    let i = tree.position(aggkey).ok_or(MuSigError::NotALeaf)?;
    Ok(tree.proof_for_index(i))
}

/// Recomputes the root from `aggkey` along `proof`. The side bits must agree
/// with the claimed leaf index.
pub fn verify_membership(root: &Hash32, aggkey: &PublicKey, proof: &MerkleProof) -> bool {
    if proof.path.len() > 32 {
        return false;
    }
    if proof.path.len() < 32 && (proof.leaf_index as u64) >> proof.path.len() != 0 {
        return false;
    }
    let mut acc = leaf_hash(aggkey);
    for (depth, step) in proof.path.iter().enumerate() {
        let is_right_child = (proof.leaf_index >> depth) & 1 == 1;
        acc = match (step.side, is_right_child) {
            (Side::Left, true) => node_hash(&step.sibling, &acc),
            (Side::Right, false) => node_hash(&acc, &step.sibling),
            _ => return false,
        };
    }
    acc == *root
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::musig::KeyPair;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn members(n: usize, seed: u64) -> KeyList {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        KeyList::new(
            (0..n)
                .map(|_| *KeyPair::generate(&mut rng).public())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn subset_enumeration_order() {
        let subsets = combination_subsets(4, Percent::from_whole(50)).unwrap();
        let expect: Vec<Vec<usize>> = vec![
            vec![0, 1],
            vec![0, 2],
            vec![0, 3],
            vec![1, 2],
            vec![1, 3],
            vec![2, 3],
            vec![0, 1, 2],
            vec![0, 1, 3],
            vec![0, 2, 3],
            vec![1, 2, 3],
            vec![0, 1, 2, 3],
        ];
        assert_eq!(subsets, expect);
    }

    #[test]
    fn threshold_bounds() {
        assert!(combination_count(4, Percent::from_whole(100)).is_err());
        assert!(combination_count(4, Percent::from_hundredths(4999)).is_err());
        assert_eq!(
            combination_count(1, Percent::from_whole(99)).unwrap(),
            BigUint::from(1u32)
        );
        assert_eq!(
            combination_subsets(1, Percent::from_whole(50)).unwrap(),
            vec![vec![0]]
        );
    }

    #[test]
    fn eight_of_seventy_five_percent() {
        assert_eq!(
            combination_count(8, Percent::from_whole(75)).unwrap(),
            BigUint::from(37u32)
        );
        let tree =
            CombinationMerkleTree::for_members(&members(8, 1), Percent::from_whole(75)).unwrap();
        assert_eq!(tree.leaves().len(), 37);
        assert_eq!(tree.padded_leaf_count(), 64);
        assert_eq!(tree.depth(), 6);
        for (i, leaf) in tree.leaves().iter().enumerate() {
            let proof = prove_membership(&tree, leaf.point()).unwrap();
            assert_eq!(proof.leaf_index as usize, i);
            assert_eq!(proof.path.len(), 6);
            assert!(verify_membership(&tree.root(), leaf.point(), &proof));
        }
    }

    #[test]
    fn single_leaf_root_is_leaf_hash() {
        let m = members(1, 2);
        let tree = CombinationMerkleTree::for_members(&m, Percent::from_whole(75)).unwrap();
        assert_eq!(tree.root(), leaf_hash(tree.leaves()[0].point()));
        let proof = prove_membership(&tree, tree.leaves()[0].point()).unwrap();
        assert!(proof.path.is_empty());
        assert!(verify_membership(
            &tree.root(),
            tree.leaves()[0].point(),
            &proof
        ));
    }

    #[test]
    fn flipped_side_bit_fails() {
        let tree =
            CombinationMerkleTree::for_members(&members(4, 3), Percent::from_whole(50)).unwrap();
        let leaf = tree.leaves()[5].point();
        let mut proof = prove_membership(&tree, leaf).unwrap();
        proof.path[1].side = match proof.path[1].side {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        };
        assert!(!verify_membership(&tree.root(), leaf, &proof));
    }

    #[test]
    fn proof_encoding_roundtrip() {
        let tree =
            CombinationMerkleTree::for_members(&members(4, 4), Percent::from_whole(50)).unwrap();
        let proof = tree.proof_for_index(3);
        let bytes = proof.to_bytes();
        assert_eq!(bytes.len(), 4 + 4 * 33);
        assert_eq!(MerkleProof::from_bytes(&bytes).unwrap(), proof);
        assert!(MerkleProof::from_bytes(&bytes[..10]).is_err());
    }

    #[test]
    fn empty_tree_rejected() {
        assert_eq!(build_tree(vec![]).unwrap_err(), MuSigError::EmptyTree);
    }
}
