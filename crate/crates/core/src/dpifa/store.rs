use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::ops::RangeInclusive;
use std::sync::Arc;

use super::counters::LinkCounters;
use super::report::DpifaReport;
use crate::musig::PublicKey;
use crate::RouterId;

/// `(rid, nid, seq)`.
pub type ReportKey = (RouterId, RouterId, u32);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Rejection {
    #[error("reporter {0} is not a registered member")]
    UnknownReporter(RouterId),
    #[error("signature does not verify")]
    BadSignature,
    #[error("report {0:?} is already stored")]
    Duplicate(ReportKey),
    #[error("nonce {nonce:#x} from {rid} was already used")]
    ReplayedNonce { rid: RouterId, nonce: u32 },
    #[error("report is outside the current cycle")]
    Stale,
    #[error("reporter and neighbor are the same router")]
    SelfLink,
}

/// Signature check applied on ingestion.
pub trait ReportVerifier {
    fn check(&self, report: &DpifaReport) -> Result<(), Rejection>;
}

/// Registered public key per router.
#[derive(Debug, Clone, Default)]
pub struct KeyDirectory {
    keys: BTreeMap<RouterId, PublicKey>,
}

impl KeyDirectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: RouterId, key: PublicKey) {
        self.keys.insert(id, key);
    }

    pub fn get(&self, id: RouterId) -> Option<&PublicKey> {
        self.keys.get(&id)
    }
}

impl FromIterator<(RouterId, PublicKey)> for KeyDirectory {
    fn from_iter<I: IntoIterator<Item = (RouterId, PublicKey)>>(iter: I) -> Self {
        KeyDirectory {
            keys: iter.into_iter().collect(),
        }
    }
}

impl ReportVerifier for KeyDirectory {
    fn check(&self, report: &DpifaReport) -> Result<(), Rejection> {
        let key = self
            .get(report.body.rid)
            .ok_or(Rejection::UnknownReporter(report.body.rid))?;
        if report.verify(key) {
            Ok(())
        } else {
            Err(Rejection::BadSignature)
        }
    }
}

/// Reports received during one settlement cycle.
#[derive(Debug, Clone)]
pub struct CycleStore {
    cycle: u32,
    seqs: RangeInclusive<u32>,
    window: RangeInclusive<u32>,
    reports: BTreeMap<ReportKey, Arc<DpifaReport>>,
    nonces: HashSet<(RouterId, u32)>,
}

impl CycleStore {
    /// `seqs` are the period numbers of the cycle, `window` the accepted
    /// timestamp range in seconds.
    pub fn new(cycle: u32, seqs: RangeInclusive<u32>, window: RangeInclusive<u32>) -> Self {
        CycleStore {
            cycle,
            seqs,
            window,
            reports: BTreeMap::new(),
            nonces: HashSet::new(),
        }
    }

    pub fn cycle(&self) -> u32 {
        self.cycle
    }

    pub fn seqs(&self) -> RangeInclusive<u32> {
        self.seqs.clone()
    }

    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }

    pub fn get(&self, key: &ReportKey) -> Option<&Arc<DpifaReport>> {
        self.reports.get(key)
    }

    pub fn contains(&self, key: &ReportKey) -> bool {
        self.reports.contains_key(key)
    }

    pub fn reports(&self) -> impl Iterator<Item = &Arc<DpifaReport>> {
        self.reports.values()
    }

    /// Accepts a report after signature, freshness, duplicate and replay
    /// checks.
    pub fn ingest(
        &mut self,
        report: Arc<DpifaReport>,
        verifier: &dyn ReportVerifier,
    ) -> Result<(), Rejection> {
        let b = &report.body;
        if b.rid == b.nid {
            return Err(Rejection::SelfLink);
        }
        if b.cycle != self.cycle
            || !self.seqs.contains(&b.seq)
            || !self.window.contains(&b.timestamp)
        {
            return Err(Rejection::Stale);
        }
        let key = (b.rid, b.nid, b.seq);
        if self.reports.contains_key(&key) {
            return Err(Rejection::Duplicate(key));
        }
        if self.nonces.contains(&(b.rid, b.nonce)) {
            return Err(Rejection::ReplayedNonce {
                rid: b.rid,
                nonce: b.nonce,
            });
        }
        verifier.check(&report)?;
        self.nonces.insert((b.rid, b.nonce));
        self.reports.insert(key, report);
        Ok(())
    }
}

/// Per-link totals over a cycle, plus the report tuples that never arrived.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AggregatedCounters {
    pub links: BTreeMap<(RouterId, RouterId), LinkCounters>,
    pub missing: BTreeSet<ReportKey>,
}

impl AggregatedCounters {
    pub fn get(&self, rid: RouterId, nid: RouterId) -> Option<&LinkCounters> {
        self.links.get(&(rid, nid))
    }

    /// Routers appearing as reporter of any link.
    pub fn reporters(&self) -> BTreeSet<RouterId> {
        self.links.keys().map(|(r, _)| *r).collect()
    }

    /// Neighbors `rid` reported about.
    pub fn reported_neighbors(&self, rid: RouterId) -> impl Iterator<Item = RouterId> + '_ {
        self.links
            .range((rid, RouterId(0))..=(rid, RouterId(u32::MAX)))
            .map(|((_, n), _)| *n)
    }

    /// Unordered pairs `{a, b}` (`a < b`) with a missing report in either
    /// direction.
    pub fn incomplete_pairs(&self) -> BTreeSet<(RouterId, RouterId)> {
        self.missing
            .iter()
            .map(|&(r, n, _)| (r.min(n), r.max(n)))
            .collect()
    }

    pub fn is_complete(&self, a: RouterId, b: RouterId) -> bool {
        !self.incomplete_pairs().contains(&(a.min(b), a.max(b)))
    }
}

/// Sums every stored report per directed link. `expected` lists the directed
/// `(reporter, neighbor)` links that must report each period; absent tuples
/// are returned in `missing`.
pub fn aggregate(
    store: &CycleStore,
    expected: &BTreeSet<(RouterId, RouterId)>,
) -> AggregatedCounters {
    let mut agg = AggregatedCounters::default();
    for r in store.reports() {
        *agg.links.entry((r.body.rid, r.body.nid)).or_default() += r.body.counters;
    }
    for &(rid, nid) in expected {
        agg.links.entry((rid, nid)).or_default();
        for seq in store.seqs() {
            if !store.contains(&(rid, nid, seq)) {
                agg.missing.insert((rid, nid, seq));
            }
        }
    }
    agg
}
