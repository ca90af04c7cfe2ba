use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use super::bus::{ByteCounts, MessageClass};
use crate::{Address, RouterId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Settled {
        proposer: RouterId,
        stp_cycle: u32,
        signers: usize,
    },
    SettleRejected {
        proposer: RouterId,
        reason: String,
    },
    StpRejected {
        proposer: RouterId,
        validator: RouterId,
        reason: String,
    },
    InsufficientConfirmations {
        proposer: RouterId,
        agreeing: usize,
        required: usize,
    },
    StpBuildFailed {
        proposer: RouterId,
        reason: String,
    },
    Abandoned {
        proposer: RouterId,
    },
    Joined {
        router: RouterId,
    },
    Left {
        router: RouterId,
        refund_wei: u128,
    },
    Evicted {
        router: RouterId,
        refund_wei: u128,
    },
    TopUp {
        router: RouterId,
        wei: u128,
    },
    ReportRejected {
        rid: RouterId,
        nid: RouterId,
        seq: u32,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlowDelivery {
    pub source: RouterId,
    pub destination: RouterId,
    pub offered_bytes: u64,
    pub delivered_bytes: u64,
}

impl FlowDelivery {
    pub fn ratio(&self) -> f64 {
        if self.offered_bytes == 0 {
            return 0.0;
        }
        self.delivered_bytes as f64 / self.offered_bytes as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RouterRow {
    pub router: RouterId,
    pub address: Address,
    pub member: bool,
    pub tokens: u128,
    pub ether_value_wei: u128,
    /// Criteria violations implicating this router this cycle.
    pub violations: usize,
    /// Entry applied by this cycle's settlement.
    pub entry: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct CycleMetrics {
    pub cycle: u32,
    pub height: u64,
    pub settled: bool,
    pub proposals: usize,
    pub events: Vec<Event>,
    /// Violations by criterion name.
    pub violations: BTreeMap<String, usize>,
    pub bytes: ByteCounts,
    pub delivery: Vec<FlowDelivery>,
    pub token_supply: u128,
    pub ether_escrow: u128,
    pub net_entries: i128,
    pub routers: Vec<RouterRow>,
}

/// Time series of one run, one record per cycle.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Metrics {
    pub cycles: Vec<CycleMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub cycles: usize,
    pub settles: usize,
    pub settle_rejections: usize,
    pub stp_rejections: usize,
    pub violations: BTreeMap<String, usize>,
    pub evictions: Vec<RouterId>,
    pub bytes: ByteCounts,
    /// Total excluding the byte-counter extension.
    pub message_bytes: u64,
    pub final_tokens: BTreeMap<RouterId, u128>,
    pub final_ether_value_wei: BTreeMap<RouterId, u128>,
    pub rewards: BTreeMap<RouterId, usize>,
    pub mean_delivery_ratio: f64,
}

impl Metrics {
    pub fn settles(&self) -> usize {
        self.cycles.iter().filter(|c| c.settled).count()
    }

    pub fn events(&self) -> impl Iterator<Item = (u32, &Event)> {
        self.cycles
            .iter()
            .flat_map(|c| c.events.iter().map(move |e| (c.cycle, e)))
    }

    pub fn bytes(&self) -> ByteCounts {
        let mut total = ByteCounts::new();
        for c in &self.cycles {
            for (k, v) in &c.bytes {
                *total.entry(*k).or_default() += v;
            }
        }
        total
    }

    /// All message bytes except the byte-counter extension.
    pub fn message_bytes(&self) -> u64 {
        self.bytes()
            .iter()
            .filter(|(k, _)| **k != MessageClass::DpifaExtension)
            .map(|(_, v)| v)
            .sum()
    }

    pub fn violations(&self) -> BTreeMap<String, usize> {
        let mut total = BTreeMap::new();
        for c in &self.cycles {
            for (k, v) in &c.violations {
                *total.entry(k.clone()).or_default() += v;
            }
        }
        total
    }

    pub fn evictions(&self) -> Vec<RouterId> {
        self.events()
            .filter_map(|(_, e)| match e {
                Event::Evicted { router, .. } => Some(*router),
                _ => None,
            })
            .collect()
    }

    pub fn last_row(&self, router: RouterId) -> Option<&RouterRow> {
        self.cycles
            .last()?
            .routers
            .iter()
            .find(|r| r.router == router)
    }

    pub fn summary(&self) -> Summary {
        let count = |f: fn(&Event) -> bool| self.events().filter(|(_, e)| f(e)).count();
        let mut rewards = BTreeMap::new();
        for (_, e) in self.events() {
            if let Event::Settled { proposer, .. } = e {
                *rewards.entry(*proposer).or_default() += 1;
            }
        }
        let last = self
            .cycles
            .last()
            .map(|c| c.routers.as_slice())
            .unwrap_or_default();
        let flows: Vec<_> = self.cycles.iter().flat_map(|c| &c.delivery).collect();
        Summary {
            cycles: self.cycles.len(),
            settles: self.settles(),
            settle_rejections: count(|e| matches!(e, Event::SettleRejected { .. })),
            stp_rejections: count(|e| matches!(e, Event::StpRejected { .. })),
            violations: self.violations(),
            evictions: self.evictions(),
            bytes: self.bytes(),
            message_bytes: self.message_bytes(),
            final_tokens: last.iter().map(|r| (r.router, r.tokens)).collect(),
            final_ether_value_wei: last.iter().map(|r| (r.router, r.ether_value_wei)).collect(),
            rewards,
            mean_delivery_ratio: if flows.is_empty() {
                0.0
            } else {
                flows.iter().map(|f| f.ratio()).sum::<f64>() / flows.len() as f64
            },
        }
    }

    /// One row per cycle and router.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cycle,router,member,tokens,ether_value_wei,violations,entry\n");
        for c in &self.cycles {
            for r in &c.routers {
                let entry = r.entry.map(|e| e.to_string()).unwrap_or_default();
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    c.cycle, r.router.0, r.member, r.tokens, r.ether_value_wei, r.violations, entry
                )
                .unwrap();
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_one_row_per_router_and_cycle() {
        let row = |i| RouterRow {
            router: RouterId(i),
            address: Address([i as u8; 20]),
            member: true,
            tokens: 5,
            ether_value_wei: 7,
            violations: 0,
            entry: Some(-1),
        };
        let m = Metrics {
            cycles: (0..2)
                .map(|c| CycleMetrics {
                    cycle: c,
                    routers: vec![row(0), row(1)],
                    ..Default::default()
                })
                .collect(),
        };
        let csv = m.to_csv();
        assert_eq!(csv.lines().count(), 5);
        assert_eq!(csv.lines().nth(4).unwrap(), "1,1,true,5,7,0,-1");
        assert_eq!(m.summary().final_tokens.len(), 2);
    }
}
