//! Undirected router graphs: adjacency, BFS distances, shortest-path next hops.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::RouterId;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Topology {
    adj: BTreeMap<RouterId, BTreeSet<RouterId>>,
}

impl Topology {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_edges<I: IntoIterator<Item = (RouterId, RouterId)>>(
        nodes: &[RouterId],
        edges: I,
    ) -> Self {
        let mut t = Topology::new();
        for &n in nodes {
            t.add_node(n);
        }
        for (a, b) in edges {
            t.add_edge(a, b);
        }
        t
    }

    pub fn add_node(&mut self, n: RouterId) {
        self.adj.entry(n).or_default();
    }

    pub fn add_edge(&mut self, a: RouterId, b: RouterId) {
        if a == b {
            return;
        }
        self.adj.entry(a).or_default().insert(b);
        self.adj.entry(b).or_default().insert(a);
    }

    pub fn remove_node(&mut self, n: RouterId) {
        if let Some(neigh) = self.adj.remove(&n) {
            for m in neigh {
                if let Some(s) = self.adj.get_mut(&m) {
                    s.remove(&n);
                }
            }
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = RouterId> + '_ {
        self.adj.keys().copied()
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn contains(&self, n: RouterId) -> bool {
        self.adj.contains_key(&n)
    }

    pub fn neighbors(&self, n: RouterId) -> impl Iterator<Item = RouterId> + '_ {
        self.adj.get(&n).into_iter().flat_map(|s| s.iter().copied())
    }

    pub fn degree(&self, n: RouterId) -> usize {
        self.adj.get(&n).map_or(0, BTreeSet::len)
    }

    pub fn has_edge(&self, a: RouterId, b: RouterId) -> bool {
        self.adj.get(&a).is_some_and(|s| s.contains(&b))
    }

    /// Undirected edges with `a < b`.
    pub fn edges(&self) -> impl Iterator<Item = (RouterId, RouterId)> + '_ {
        self.adj
            .iter()
            .flat_map(|(&a, s)| s.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    /// Hop distances from `src` to every reachable node.
    pub fn distances_from(&self, src: RouterId) -> BTreeMap<RouterId, usize> {
        let mut dist = BTreeMap::new();
        if !self.contains(src) {
            return dist;
        }
        let mut queue = VecDeque::from([src]);
        dist.insert(src, 0);
        while let Some(u) = queue.pop_front() {
            let d = dist[&u];
            for v in self.neighbors(u) {
                if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(v) {
                    e.insert(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        match self.adj.keys().next() {
            None => true,
            Some(&first) => self.distances_from(first).len() == self.adj.len(),
        }
    }

    /// Mean shortest-path length over all unordered pairs that can reach each
    /// other, exactly. Zero when there are no such pairs.
    pub fn average_hop_count(&self) -> BigRational {
        let nodes: Vec<RouterId> = self.nodes().collect();
        let mut total: u64 = 0;
        let mut pairs: u64 = 0;
        for (i, &a) in nodes.iter().enumerate() {
            let dist = self.distances_from(a);
            for &b in &nodes[i + 1..] {
                if let Some(d) = dist.get(&b) {
                    total += *d as u64;
                    pairs += 1;
                }
            }
        }
        if pairs == 0 {
            return BigRational::zero();
        }
        BigRational::new(BigInt::from(total), BigInt::from(pairs))
    }

    /// Next hop on a shortest path from every node to `dst`. Ties go to the
    /// lowest neighbor id.
    pub fn next_hops_towards(&self, dst: RouterId) -> BTreeMap<RouterId, RouterId> {
        let dist = self.distances_from(dst);
        let mut out = BTreeMap::new();
        for (&n, &d) in &dist {
            if d == 0 {
                continue;
            }
            if let Some(hop) = self.neighbors(n).find(|m| dist.get(m) == Some(&(d - 1))) {
                out.insert(n, hop);
            }
        }
        out
    }

    /// Shortest path `src ..= dst`, or `None` if unreachable.
    pub fn path(&self, src: RouterId, dst: RouterId) -> Option<Vec<RouterId>> {
        if src == dst {
            return self.contains(src).then(|| vec![src]);
        }
        let hops = self.next_hops_towards(dst);
        let mut path = vec![src];
        let mut cur = src;
        while cur != dst {
            cur = *hops.get(&cur)?;
            path.push(cur);
        }
        Some(path)
    }
}
