use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use super::SettlementError;
use crate::dpifa::{AggregatedCounters, AuditReport};
use crate::topology::Topology;
use crate::{RouterId, BYTES_PER_GB};

/// Link prices in token subunits per GB, per directed link.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PriceView {
    prices: BTreeMap<(RouterId, RouterId), u64>,
}

impl PriceView {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, owner: RouterId, neighbor: RouterId, price: u64) {
        self.prices.insert((owner, neighbor), price);
    }

    /// Sets the same price in both directions.
    pub fn set_link(&mut self, a: RouterId, b: RouterId, price: u64) {
        self.set(a, b, price);
        self.set(b, a, price);
    }

    /// The link price, only if both sides registered the same value.
    pub fn symmetric(&self, a: RouterId, b: RouterId) -> Option<u64> {
        match (self.prices.get(&(a, b)), self.prices.get(&(b, a))) {
            (Some(x), Some(y)) if x == y => Some(*x),
            _ => None,
        }
    }

    /// Undirected links (`a < b`) with a symmetric price.
    pub fn links(&self) -> BTreeSet<(RouterId, RouterId)> {
        self.prices
            .keys()
            .filter(|(a, b)| a < b && self.symmetric(*a, *b).is_some())
            .copied()
            .collect()
    }

    /// Restricts the view to links between `members`.
    pub fn restricted_to(&self, members: &BTreeSet<RouterId>) -> PriceView {
        PriceView {
            prices: self
                .prices
                .iter()
                .filter(|((a, b), _)| members.contains(a) && members.contains(b))
                .map(|(k, v)| (*k, *v))
                .collect(),
        }
    }
}

/// Links and routers whose forwarding credit is withheld this cycle.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Exclusions {
    /// Unordered pairs `(a, b)` with `a < b`.
    pub links: BTreeSet<(RouterId, RouterId)>,
    pub uncredited: BTreeSet<RouterId>,
}

impl Exclusions {
    /// Links failing symmetry or origin checks or still missing reports are
    /// excluded; routers failing conservation earn no forwarding credit.
    pub fn from_audit(audit: &AuditReport, agg: &AggregatedCounters) -> Self {
        let mut ex = Exclusions {
            links: agg.incomplete_pairs(),
            ..Default::default()
        };
        for v in &audit.violations {
            match v.link() {
                Some(link) => {
                    ex.links.insert(link);
                }
                None => ex.uncredited.extend(v.implicated()),
            }
        }
        ex
    }

    pub fn excludes_link(&self, a: RouterId, b: RouterId) -> bool {
        self.links.contains(&(a.min(b), a.max(b)))
    }
}

/// `F_{n,a} = I - T` in bytes from `n`'s own reports about `a`.
pub fn forwarded_bytes(agg: &AggregatedCounters, n: RouterId, a: RouterId) -> i128 {
    agg.get(n, a)
        .map_or(0, |c| c.input.bytes as i128 - c.terminated.bytes as i128)
}

/// Mean unweighted shortest-path length over all connected member pairs.
pub fn avg_hop_count(topology: &Topology) -> BigRational {
    topology.average_hop_count()
}

/// Mean price over distinct undirected links with a symmetric price.
pub fn avg_price(prices: &PriceView) -> BigRational {
    let links = prices.links();
    if links.is_empty() {
        return BigRational::zero();
    }
    let sum: u128 = links
        .iter()
        .map(|&(a, b)| prices.symmetric(a, b).unwrap() as u128)
        .sum();
    BigRational::new(BigInt::from(sum), BigInt::from(links.len()))
}

fn int(v: impl Into<BigInt>) -> BigRational {
    BigRational::from_integer(v.into())
}

/// Credit delta of every router in `topology`, in token subunits, exactly:
/// `C_n = sum_a F_{n,a} P_{n,a} - S_{n,a} P_avg H_avg`.
///
/// The origination charge uses the larger of what `n` declared as started and
/// what `a` saw originating from `n`.
pub fn compute_entries_exact(
    agg: &AggregatedCounters,
    prices: &PriceView,
    topology: &Topology,
    exclusions: &Exclusions,
) -> Result<BTreeMap<RouterId, BigRational>, SettlementError> {
    let h_avg = avg_hop_count(topology);
    let p_avg = avg_price(prices);
    let charge_rate = &p_avg * &h_avg;
    let gb = int(BYTES_PER_GB);
    let mut out = BTreeMap::new();
    for n in topology.nodes() {
        let mut credit = BigRational::zero();
        let mut charged_bytes: u128 = 0;
        for a in topology.neighbors(n) {
            let f = forwarded_bytes(agg, n, a);
            if !exclusions.uncredited.contains(&n) && !exclusions.excludes_link(n, a) && f != 0 {
                let price = prices
                    .symmetric(n, a)
                    .ok_or(SettlementError::MissingPrice(n, a))?;
                credit += int(f) * int(price);
            }
            let started = agg.get(n, a).map_or(0, |c| c.started.bytes);
            let seen = agg.get(a, n).map_or(0, |c| c.origin_from_neighbor.bytes);
            charged_bytes += started.max(seen) as u128;
        }
        let c = (credit - int(charged_bytes) * &charge_rate) / &gb;
        out.insert(n, c);
    }
    Ok(out)
}

/// [`compute_entries_exact`] rounded toward zero to whole subunits.
pub fn compute_entries(
    agg: &AggregatedCounters,
    prices: &PriceView,
    topology: &Topology,
    exclusions: &Exclusions,
) -> Result<BTreeMap<RouterId, i64>, SettlementError> {
    compute_entries_exact(agg, prices, topology, exclusions)?
        .into_iter()
        .map(|(n, c)| {
            c.trunc()
                .to_integer()
                .to_i64()
                .map(|v| (n, v))
                .ok_or(SettlementError::EntryOverflow(n))
        })
        .collect()
}
