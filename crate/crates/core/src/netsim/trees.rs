use std::collections::VecDeque;
use std::sync::Arc;

use crate::musig::{CombinationMerkleTree, KeyList, MuSigError, PublicKey, POINT_LEN};
use crate::Percent;

/// Recently built membership trees, keyed by member set. Every honest router
/// derives the same tree from the same members, so one copy serves all.
#[derive(Debug)]
pub struct TreeCache {
    zeta: Percent,
    capacity: usize,
    entries: VecDeque<(Vec<[u8; POINT_LEN]>, Arc<CombinationMerkleTree>)>,
    builds: usize,
}

impl TreeCache {
    pub fn new(zeta: Percent) -> Self {
        TreeCache {
            zeta,
            capacity: 4,
            entries: VecDeque::new(),
            builds: 0,
        }
    }

    pub fn get(&mut self, members: &[PublicKey]) -> Result<Arc<CombinationMerkleTree>, MuSigError> {
        let mut key: Vec<_> = members.iter().map(|k| k.to_bytes()).collect();
        key.sort_unstable();
        if let Some((_, t)) = self.entries.iter().find(|(k, _)| *k == key) {
            return Ok(t.clone());
        }
        let tree = Arc::new(CombinationMerkleTree::for_members(
            &KeyList::new(members.to_vec())?,
            self.zeta,
        )?);
        self.builds += 1;
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back((key, tree.clone()));
        Ok(tree)
    }

    /// Trees built so far, cache hits excluded.
    pub fn builds(&self) -> usize {
        self.builds
    }
}
