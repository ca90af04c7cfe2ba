use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::counters::Counter;
use super::store::AggregatedCounters;
use crate::topology::Topology;
use crate::RouterId;

/// A failed credibility criterion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "criterion", rename_all = "snake_case")]
pub enum Violation {
    /// `O_{sender,receiver} != I_{receiver,sender}`.
    Symmetry {
        sender: RouterId,
        receiver: RouterId,
        sent: Counter,
        received: Counter,
    },
    /// `sum I - sum T != sum O - sum S` over the router's links.
    Conservation {
        router: RouterId,
        input: Counter,
        terminated: Counter,
        output: Counter,
        started: Counter,
    },
    /// `S_{sender,receiver} != OFN_{receiver,sender}`.
    Origin {
        sender: RouterId,
        receiver: RouterId,
        started: Counter,
        origin_seen: Counter,
    },
}

impl Violation {
    pub fn criterion(&self) -> &'static str {
        match self {
            Violation::Symmetry { .. } => "symmetry",
            Violation::Conservation { .. } => "conservation",
            Violation::Origin { .. } => "origin",
        }
    }

    /// Routers whose reports are involved.
    pub fn implicated(&self) -> Vec<RouterId> {
        match *self {
            Violation::Symmetry {
                sender, receiver, ..
            }
            | Violation::Origin {
                sender, receiver, ..
            } => {
                vec![sender, receiver]
            }
            Violation::Conservation { router, .. } => vec![router],
        }
    }

    /// The unordered link, for link-level criteria.
    pub fn link(&self) -> Option<(RouterId, RouterId)> {
        match *self {
            Violation::Symmetry {
                sender, receiver, ..
            }
            | Violation::Origin {
                sender, receiver, ..
            } => Some((sender.min(receiver), sender.max(receiver))),
            Violation::Conservation { .. } => None,
        }
    }
}

/// Both reports of the pair are present and no period is missing.
fn auditable_pair(
    agg: &AggregatedCounters,
    incomplete: &BTreeSet<(RouterId, RouterId)>,
    a: RouterId,
    b: RouterId,
) -> bool {
    agg.get(a, b).is_some()
        && agg.get(b, a).is_some()
        && !incomplete.contains(&(a.min(b), a.max(b)))
}

/// Criterion (a): every link's output on one side equals the input on the
/// other, in packets and bytes.
pub fn check_symmetry(agg: &AggregatedCounters) -> Vec<Violation> {
    let incomplete = agg.incomplete_pairs();
    let mut out = Vec::new();
    for (&(n, m), ln) in &agg.links {
        if n >= m || !auditable_pair(agg, &incomplete, n, m) {
            continue;
        }
        let lm = agg.get(m, n).expect("checked");
        if !ln.has_traffic() && !lm.has_traffic() {
            continue;
        }
        if ln.output != lm.input {
            out.push(Violation::Symmetry {
                sender: n,
                receiver: m,
                sent: ln.output,
                received: lm.input,
            });
        }
        if lm.output != ln.input {
            out.push(Violation::Symmetry {
                sender: m,
                receiver: n,
                sent: lm.output,
                received: ln.input,
            });
        }
    }
    out
}

fn conservation_sums(agg: &AggregatedCounters, n: RouterId) -> [Counter; 4] {
    let mut sums = [Counter::ZERO; 4];
    for m in agg.reported_neighbors(n) {
        let c = agg.get(n, m).expect("reported");
        sums[0] += c.input;
        sums[1] += c.terminated;
        sums[2] += c.output;
        sums[3] += c.started;
    }
    sums
}

/// Criterion (b) for router `n`: traffic that entered and did not terminate
/// equals traffic that left and did not start here.
pub fn check_conservation(agg: &AggregatedCounters, n: RouterId) -> bool {
    let [i, t, o, s] = conservation_sums(agg, n);
    let lhs = (
        i.packets as i128 - t.packets as i128,
        i.bytes as i128 - t.bytes as i128,
    );
    let rhs = (
        o.packets as i128 - s.packets as i128,
        o.bytes as i128 - s.bytes as i128,
    );
    lhs == rhs
}

/// Criterion (b) for every reporter whose links are all complete.
pub fn conservation_violations(agg: &AggregatedCounters) -> Vec<Violation> {
    let incomplete = agg.incomplete_pairs();
    agg.reporters()
        .into_iter()
        .filter(|&n| {
            agg.reported_neighbors(n)
                .all(|m| !incomplete.contains(&(n.min(m), n.max(m))))
        })
        .filter(|&n| !check_conservation(agg, n))
        .map(|n| {
            let [input, terminated, output, started] = conservation_sums(agg, n);
            Violation::Conservation {
                router: n,
                input,
                terminated,
                output,
                started,
            }
        })
        .collect()
}

/// Criterion (c): what a router says it started towards a neighbor equals
/// what that neighbor saw originating from it.
pub fn check_ofn(agg: &AggregatedCounters) -> Vec<Violation> {
    let incomplete = agg.incomplete_pairs();
    let mut out = Vec::new();
    for (&(n, m), ln) in &agg.links {
        if !auditable_pair(agg, &incomplete, n, m) {
            continue;
        }
        let lm = agg.get(m, n).expect("checked");
        if ln.started != lm.origin_from_neighbor {
            out.push(Violation::Origin {
                sender: n,
                receiver: m,
                started: ln.started,
                origin_seen: lm.origin_from_neighbor,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, criterion: &str) -> usize {
        self.violations
            .iter()
            .filter(|v| v.criterion() == criterion)
            .count()
    }

    pub fn implicated(&self) -> BTreeSet<RouterId> {
        self.violations
            .iter()
            .flat_map(Violation::implicated)
            .collect()
    }
}

/// Runs all three criteria.
pub fn audit(agg: &AggregatedCounters) -> AuditReport {
    let mut violations = check_symmetry(agg);
    violations.extend(conservation_violations(agg));
    violations.extend(check_ofn(agg));
    AuditReport { violations }
}

/// Member graph: an edge exists when either side reported the link this
/// cycle or the link is registered with a price.
pub fn infer_topology(
    agg: &AggregatedCounters,
    registered: &BTreeSet<(RouterId, RouterId)>,
    members: &BTreeSet<RouterId>,
) -> Topology {
    let mut t = Topology::new();
    for &m in members {
        t.add_node(m);
    }
    let edges = agg.links.keys().chain(registered.iter());
    for &(a, b) in edges {
        if members.contains(&a) && members.contains(&b) {
            t.add_edge(a, b);
        }
    }
    t
}
