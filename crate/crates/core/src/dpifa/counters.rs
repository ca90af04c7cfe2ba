use std::collections::BTreeMap;
use std::ops::{Add, AddAssign};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::report::{DpifaReport, ReportBody, ReportError};
use crate::musig::KeyPair;
use crate::RouterId;

/// Packet and byte count pair.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct Counter {
    pub packets: u64,
    pub bytes: u64,
}

impl Counter {
    pub const ZERO: Counter = Counter {
        packets: 0,
        bytes: 0,
    };

    pub fn new(packets: u64, bytes: u64) -> Self {
        Counter { packets, bytes }
    }

    pub fn is_zero(&self) -> bool {
        self.packets == 0 && self.bytes == 0
    }

    fn bump(&mut self, packets: u64, bytes: u64) {
        self.packets += packets;
        self.bytes += bytes;
    }
}

impl Add for Counter {
    type Output = Counter;
    fn add(self, o: Counter) -> Counter {
        Counter {
            packets: self.packets + o.packets,
            bytes: self.bytes + o.bytes,
        }
    }
}

impl AddAssign for Counter {
    fn add_assign(&mut self, o: Counter) {
        *self = *self + o;
    }
}

/// Counters one router keeps about one neighbor link.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinkCounters {
    /// I: packets received from the neighbor.
    pub input: Counter,
    /// O: packets sent to the neighbor.
    pub output: Counter,
    /// S: packets sent to the neighbor that started at this router.
    pub started: Counter,
    /// T: packets received from the neighbor that terminated at this router.
    pub terminated: Counter,
    /// OFN: packets received from the neighbor whose source is the neighbor.
    pub origin_from_neighbor: Counter,
}

impl LinkCounters {
    pub fn is_zero(&self) -> bool {
        self.fields().iter().all(Counter::is_zero)
    }

    pub fn has_traffic(&self) -> bool {
        !self.input.is_zero() || !self.output.is_zero()
    }

    /// `[I, O, S, T, OFN]`.
    pub fn fields(&self) -> [Counter; 5] {
        [
            self.input,
            self.output,
            self.started,
            self.terminated,
            self.origin_from_neighbor,
        ]
    }

    pub fn fields_mut(&mut self) -> [&mut Counter; 5] {
        [
            &mut self.input,
            &mut self.output,
            &mut self.started,
            &mut self.terminated,
            &mut self.origin_from_neighbor,
        ]
    }

    /// `S <= O`, `T <= I`, `OFN <= I` in both units.
    pub fn is_consistent(&self) -> bool {
        let le = |a: Counter, b: Counter| a.packets <= b.packets && a.bytes <= b.bytes;
        le(self.started, self.output)
            && le(self.terminated, self.input)
            && le(self.origin_from_neighbor, self.input)
    }

    /// Applies `count` identical packets described by `event`.
    pub fn account_many(&mut self, event: &PacketEvent, count: u64) {
        let bytes = event.size * count;
        match event.direction {
            Direction::In => {
                self.input.bump(count, bytes);
                if event.terminated_here {
                    self.terminated.bump(count, bytes);
                }
                if event.source == event.neighbor {
                    self.origin_from_neighbor.bump(count, bytes);
                }
            }
            Direction::Out => {
                self.output.bump(count, bytes);
                if event.originated_here {
                    self.started.bump(count, bytes);
                }
            }
        }
    }
}

impl Add for LinkCounters {
    type Output = LinkCounters;
    fn add(self, o: LinkCounters) -> LinkCounters {
        LinkCounters {
            input: self.input + o.input,
            output: self.output + o.output,
            started: self.started + o.started,
            terminated: self.terminated + o.terminated,
            origin_from_neighbor: self.origin_from_neighbor + o.origin_from_neighbor,
        }
    }
}

impl AddAssign for LinkCounters {
    fn add_assign(&mut self, o: LinkCounters) {
        *self = *self + o;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    In,
    Out,
}

/// One unicast packet crossing a link of the accounting router.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketEvent {
    pub direction: Direction,
    /// Neighbor on the other side of the link.
    pub neighbor: RouterId,
    /// Packet size in bytes.
    pub size: u64,
    /// Out only: the packet was created by this router.
    pub originated_here: bool,
    /// In only: this router is the destination.
    pub terminated_here: bool,
    /// Source address carried by the packet.
    pub source: RouterId,
}

/// Single-packet accounting rule.
pub fn account(counters: LinkCounters, event: &PacketEvent) -> LinkCounters {
    let mut c = counters;
    c.account_many(event, 1);
    c
}

/// Per-router accounting state: counters of the current period for every
/// neighbor link.
#[derive(Debug, Clone)]
pub struct RouterAccounting {
    id: RouterId,
    period: BTreeMap<RouterId, LinkCounters>,
    signer: Option<KeyPair>,
}

impl RouterAccounting {
    pub fn new<I: IntoIterator<Item = RouterId>>(id: RouterId, neighbors: I) -> Self {
        let period = neighbors
            .into_iter()
            .filter(|&n| n != id)
            .map(|n| (n, LinkCounters::default()))
            .collect();
        RouterAccounting {
            id,
            period,
            signer: None,
        }
    }

    pub fn with_signer(mut self, key: KeyPair) -> Self {
        self.signer = Some(key);
        self
    }

    pub fn id(&self) -> RouterId {
        self.id
    }

    pub fn neighbors(&self) -> impl Iterator<Item = RouterId> + '_ {
        self.period.keys().copied()
    }

    pub fn add_neighbor(&mut self, n: RouterId) {
        if n != self.id {
            self.period.entry(n).or_default();
        }
    }

    pub fn remove_neighbor(&mut self, n: RouterId) {
        self.period.remove(&n);
    }

    pub fn counters(&self, neighbor: RouterId) -> Option<&LinkCounters> {
        self.period.get(&neighbor)
    }

    pub fn record(&mut self, event: &PacketEvent) {
        self.record_many(event, 1);
    }

    pub fn record_many(&mut self, event: &PacketEvent, count: u64) {
        self.period
            .entry(event.neighbor)
            .or_default()
            .account_many(event, count);
    }

    /// Signs one report per neighbor link with the counters accumulated since
    /// the previous call, then starts a new period.
    pub fn emit_reports<R: RngCore>(
        &mut self,
        cycle: u32,
        seq: u32,
        timestamp: u32,
        rng: &mut R,
    ) -> Result<Vec<DpifaReport>, ReportError> {
        let key = self
            .signer
            .as_ref()
            .ok_or(ReportError::NoSigningKey(self.id))?;
        let mut out = Vec::with_capacity(self.period.len());
        for (&nid, counters) in &self.period {
            let body = ReportBody {
                rid: self.id,
                nid,
                seq,
                cycle,
                counters: *counters,
                timestamp,
                nonce: rng.next_u32(),
            };
            out.push(body.sign(key)?);
        }
        for c in self.period.values_mut() {
            *c = LinkCounters::default();
        }
        Ok(out)
    }
}
