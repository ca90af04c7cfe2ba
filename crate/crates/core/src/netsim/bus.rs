use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dpifa::{AggregatedCounters, DpifaReport, LinkCounters, ReportKey};
use crate::RouterId;

/// Request naming a missing report: reporter, neighbor, sequence.
pub const RECOVERY_REQUEST_LEN: usize = 12;
/// Commitment, nonce and partial signature sent by each signer.
pub const MUSIG_BYTES_PER_SIGNER: usize = 32 + 33 + 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageClass {
    /// The 116-byte accounting reports.
    Dpifa,
    /// Byte-counter extension travelling with each report.
    DpifaExtension,
    /// Re-requests and re-sent reports.
    DpifaRecovery,
    Stp,
    /// Confirmations and the announcement listing confirmers.
    Confirmation,
    MuSig,
}

/// Bytes put on the network, each broadcast counted once.
pub type ByteCounts = BTreeMap<MessageClass, u64>;

/// Delivers with probability `1 - loss`.
pub fn dispatch<R: Rng>(rng: &mut R, loss: f64) -> bool {
    loss <= 0.0 || !rng.gen_bool(loss.min(1.0))
}

/// Reports of the running cycle, with what each receiver failed to get.
#[derive(Debug, Default)]
pub struct ReportBus {
    delivered: BTreeMap<ReportKey, Arc<DpifaReport>>,
    missed: BTreeMap<RouterId, BTreeSet<ReportKey>>,
}

impl ReportBus {
    pub fn clear(&mut self) {
        self.delivered.clear();
        self.missed.clear();
    }

    pub fn insert(&mut self, report: Arc<DpifaReport>) {
        let b = &report.body;
        self.delivered.insert((b.rid, b.nid, b.seq), report);
    }

    pub fn mark_missed(&mut self, receiver: RouterId, key: ReportKey) {
        self.missed.entry(receiver).or_default().insert(key);
    }

    pub fn recovered(&mut self, receiver: RouterId, key: &ReportKey) {
        if let Some(m) = self.missed.get_mut(&receiver) {
            m.remove(key);
        }
    }

    pub fn missed_by(&self, receiver: RouterId) -> BTreeSet<ReportKey> {
        self.missed.get(&receiver).cloned().unwrap_or_default()
    }

    pub fn missed(&self) -> impl Iterator<Item = (RouterId, &BTreeSet<ReportKey>)> {
        self.missed.iter().map(|(r, s)| (*r, s))
    }

    pub fn reports(&self) -> impl Iterator<Item = &Arc<DpifaReport>> {
        self.delivered.values()
    }

    pub fn len(&self) -> usize {
        self.delivered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delivered.is_empty()
    }

    /// Per-link totals as seen by a receiver that lacks `missing`.
    /// `expected` directed links must have reported every sequence number in
    /// `seqs`.
    pub fn view(
        &self,
        missing: &BTreeSet<ReportKey>,
        expected: &BTreeSet<(RouterId, RouterId)>,
        seqs: std::ops::RangeInclusive<u32>,
    ) -> AggregatedCounters {
        let mut agg = AggregatedCounters::default();
        for (key, r) in &self.delivered {
            if !missing.contains(key) {
                *agg.links.entry((key.0, key.1)).or_default() += r.body.counters;
            }
        }
        for &(rid, nid) in expected {
            agg.links
                .entry((rid, nid))
                .or_insert_with(LinkCounters::default);
            for seq in seqs.clone() {
                let key = (rid, nid, seq);
                if !self.delivered.contains_key(&key) || missing.contains(&key) {
                    agg.missing.insert(key);
                }
            }
        }
        agg
    }
}
