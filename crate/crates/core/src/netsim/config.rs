use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::NetsimError;
use crate::ledger::ContractParams;
use crate::topology::Topology;
use crate::RouterId;

/// Accounting field a report forger perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CounterField {
    Input,
    Output,
    Started,
    Terminated,
    OriginFromNeighbor,
}

impl CounterField {
    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Behavior {
    #[default]
    Honest,
    /// Counts transit packets as received, then drops this share of them.
    FreeRider { drop_fraction: f64 },
    /// Adds `delta` packets and bytes to one field of its own reports.
    ReportForger {
        field: CounterField,
        delta: i64,
        /// Only reports about this neighbor; all of them when absent.
        #[serde(default)]
        neighbor: Option<RouterId>,
    },
    /// Stamps its own packets with `victim` as the source address.
    Spoofer { victim: RouterId },
    /// Adds this many subunits to its own entry in proposals it builds.
    StpCheater { inflate_self_by: i64 },
}

/// Buy tokens whenever the ether value of the balance drops below `below`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopUp {
    #[serde(with = "crate::units::ether")]
    pub below: u128,
    #[serde(with = "crate::units::ether")]
    pub amount: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouterSpec {
    pub id: RouterId,
    /// Initial deposit; the minimum join deposit when absent.
    #[serde(default, with = "opt_ether", skip_serializing_if = "Option::is_none")]
    pub deposit: Option<u128>,
    #[serde(default)]
    pub behavior: Behavior,
    #[serde(default = "yes")]
    pub propose: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_up: Option<TopUp>,
}

impl RouterSpec {
    pub fn new(id: RouterId) -> Self {
        RouterSpec {
            id,
            deposit: None,
            behavior: Behavior::Honest,
            propose: true,
            top_up: None,
        }
    }
}

fn yes() -> bool {
    true
}

mod opt_ether {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<u128>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => crate::units::ether::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u128>, D::Error> {
        #[derive(Deserialize)]
        struct W(#[serde(with = "crate::units::ether")] u128);
        Ok(Some(W::deserialize(d)?.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub a: RouterId,
    pub b: RouterId,
    /// Tokens per GB, registered by both endpoints.
    #[serde(with = "crate::units::tokens")]
    pub price: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    pub source: RouterId,
    pub destination: RouterId,
    pub bytes_per_period: u64,
    #[serde(default = "default_packet_size")]
    pub packet_size: u64,
}

fn default_packet_size() -> u64 {
    1500
}

/// Shorthand for regular topologies over routers `0..nodes`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Generator {
    Chain {
        nodes: u32,
        #[serde(with = "crate::units::tokens")]
        price: u64,
    },
    Ring {
        nodes: u32,
        #[serde(with = "crate::units::tokens")]
        price: u64,
    },
    /// Router 0 is the hub.
    Star {
        nodes: u32,
        #[serde(with = "crate::units::tokens")]
        price: u64,
    },
    /// `i` linked to `i + k mod nodes` for every offset `k`.
    Circulant {
        nodes: u32,
        offsets: Vec<u32>,
        #[serde(with = "crate::units::tokens")]
        price: u64,
    },
}

impl Generator {
    pub fn links(&self) -> Vec<LinkSpec> {
        let (n, price) = match self {
            Generator::Chain { nodes, price }
            | Generator::Ring { nodes, price }
            | Generator::Star { nodes, price }
            | Generator::Circulant { nodes, price, .. } => (*nodes, *price),
        };
        let link = |a: u32, b: u32| LinkSpec {
            a: RouterId(a),
            b: RouterId(b),
            price,
        };
        let mut pairs = BTreeSet::new();
        match self {
            Generator::Chain { .. } => pairs.extend((1..n).map(|i| (i - 1, i))),
            Generator::Ring { .. } => pairs.extend((0..n).map(|i| (i, (i + 1) % n))),
            Generator::Star { .. } => pairs.extend((1..n).map(|i| (0, i))),
            Generator::Circulant { offsets, .. } => {
                for i in 0..n {
                    for k in offsets {
                        pairs.insert((i, (i + k) % n));
                    }
                }
            }
        }
        pairs
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(|(a, b)| link(a, b))
            .collect()
    }
}

/// A complete simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub seed: u64,
    /// Number of settlement cycles to run.
    pub cycles: u32,
    /// Drop probability for report dissemination and recovery messages.
    #[serde(default)]
    pub loss_prob: f64,
    pub params: ContractParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<Generator>,
    #[serde(default)]
    pub links: Vec<LinkSpec>,
    /// Per-router settings; routers mentioned only by links use defaults.
    #[serde(default)]
    pub routers: Vec<RouterSpec>,
    #[serde(default)]
    pub flows: Vec<FlowSpec>,
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self, NetsimError> {
        let cfg: SimConfig =
            toml::from_str(text).map_err(|e| NetsimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Explicit links plus generated ones; explicit prices win.
    pub fn all_links(&self) -> Vec<LinkSpec> {
        let mut by_pair = BTreeMap::new();
        for l in self
            .generate
            .iter()
            .flat_map(|g| g.links())
            .chain(self.links.iter().copied())
        {
            by_pair.insert((l.a.min(l.b), l.a.max(l.b)), l);
        }
        by_pair.into_values().collect()
    }

    /// Every router with its settings, in id order.
    pub fn router_specs(&self) -> BTreeMap<RouterId, RouterSpec> {
        let mut out: BTreeMap<_, _> = self.routers.iter().map(|r| (r.id, r.clone())).collect();
        for l in self.all_links() {
            for id in [l.a, l.b] {
                out.entry(id).or_insert_with(|| RouterSpec::new(id));
            }
        }
        out
    }

    pub fn topology(&self) -> Topology {
        let nodes: Vec<_> = self.router_specs().into_keys().collect();
        Topology::from_edges(&nodes, self.all_links().iter().map(|l| (l.a, l.b)))
    }

    pub fn validate(&self) -> Result<(), NetsimError> {
        let bad = |m: String| Err(NetsimError::Config(m));
        self.params
            .validate()
            .map_err(|e| NetsimError::Config(e.to_string()))?;
        if self.params.periods_per_cycle() == 0 {
            return bad("a cycle must contain at least one report period".into());
        }
        if !(0.0..=1.0).contains(&self.loss_prob) {
            return bad(format!("loss_prob {} outside [0, 1]", self.loss_prob));
        }
        let specs = self.router_specs();
        if specs.is_empty() {
            return bad("no routers".into());
        }
        if self.routers.len()
            != self
                .routers
                .iter()
                .map(|r| r.id)
                .collect::<BTreeSet<_>>()
                .len()
        {
            return bad("duplicate router id".into());
        }
        for l in self.all_links() {
            if l.a == l.b {
                return bad(format!("self link at {}", l.a));
            }
        }
        let topo = self.topology();
        if !topo.is_connected() {
            return Err(NetsimError::Disconnected);
        }
        if !specs.values().any(|r| r.propose) {
            return Err(NetsimError::NoProposer);
        }
        for r in specs.values() {
            if r.deposit.is_some_and(|d| d < self.params.phi) {
                return bad(format!("deposit of {} below the minimum", r.id));
            }
            match r.behavior {
                Behavior::FreeRider { drop_fraction } if !(0.0..=1.0).contains(&drop_fraction) => {
                    return bad(format!("drop_fraction of {} outside [0, 1]", r.id));
                }
                Behavior::Spoofer { victim } if !specs.contains_key(&victim) => {
                    return bad(format!("spoof victim {victim} is not a router"));
                }
                _ => {}
            }
        }
        for f in &self.flows {
            if !specs.contains_key(&f.source) || !specs.contains_key(&f.destination) {
                return bad(format!(
                    "flow {} -> {} names an unknown router",
                    f.source, f.destination
                ));
            }
            if f.source == f.destination || f.packet_size == 0 {
                return bad(format!(
                    "flow {} -> {} is degenerate",
                    f.source, f.destination
                ));
            }
        }
        Ok(())
    }
}
