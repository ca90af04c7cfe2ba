use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::io::Write;
use std::rc::Rc;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution};

use super::bus::{dispatch, MessageClass, ReportBus, MUSIG_BYTES_PER_SIGNER, RECOVERY_REQUEST_LEN};
use super::config::{Behavior, SimConfig, TopUp};
use super::metrics::{CycleMetrics, Event, FlowDelivery, Metrics, RouterRow};
use super::trees::TreeCache;
use super::NetsimError;
use crate::dpifa::{
    audit, infer_topology, write_dump, AggregatedCounters, AuditReport, CycleStore, Direction,
    DpifaReport, KeyDirectory, PacketEvent, ReportKey, RouterAccounting, REPORT_EXTENSION_LEN,
    REPORT_MESSAGE_LEN, REPORT_WIRE_LEN,
};
use crate::ledger::{Authorization, ContractParams, Ledger, SettleOutcome};
use crate::musig::{prove_membership, sign_jointly, KeyPair, PublicKey};
use crate::settlement::{
    build_stp, compute_entries, threshold_met, validate_stp, Announcement, Confirmation,
    Exclusions, PriceView, Stp, StpContext, CONFIRMATION_LEN,
};
use crate::topology::Topology;
use crate::{Address, Hash32, RouterId};

const KEY_STREAM: u64 = 1;
const TRAFFIC_STREAM: u64 = 2;
const LOSS_STREAM: u64 = 3;
const CRYPTO_STREAM: u64 = 4;

fn stream(seed: u64, id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum SimEvent {
    PeriodEnd { seq: u32 },
    CycleEnd,
}

/// Events ordered by block height, then by scheduling order.
#[derive(Debug, Default)]
struct EventQueue {
    heap: BinaryHeap<Reverse<(u64, u64, SimEvent)>>,
    next: u64,
}

impl EventQueue {
    fn push(&mut self, height: u64, event: SimEvent) {
        self.heap.push(Reverse((height, self.next, event)));
        self.next += 1;
    }

    fn pop(&mut self) -> Option<(u64, SimEvent)> {
        self.heap.pop().map(|Reverse((h, _, e))| (h, e))
    }
}

#[derive(Debug)]
struct Agent {
    key: KeyPair,
    address: Address,
    accounting: RouterAccounting,
    behavior: Behavior,
    propose: bool,
    top_up: Option<TopUp>,
    active: bool,
}

/// One router's audited picture of the cycle.
#[derive(Debug)]
struct View {
    entries: BTreeMap<Address, i64>,
}

/// Event-driven run of a scenario.
#[derive(Debug)]
pub struct Simulation {
    cfg: SimConfig,
    params: ContractParams,
    topology: Topology,
    prices: PriceView,
    agents: BTreeMap<RouterId, Agent>,
    ledger: Ledger,
    trees: TreeCache,
    directory: KeyDirectory,
    traffic_rng: ChaCha20Rng,
    loss_rng: ChaCha20Rng,
    crypto_rng: ChaCha20Rng,
    queue: EventQueue,
    bus: ReportBus,
    store: CycleStore,
    cycle: u32,
    cycle_start_time: u64,
    current: CycleMetrics,
    metrics: Metrics,
    keep_reports: bool,
    report_log: Vec<Arc<DpifaReport>>,
}

/// Runs `cfg` to completion.
pub fn run(cfg: &SimConfig) -> Result<Metrics, NetsimError> {
    let mut sim = Simulation::new(cfg.clone())?;
    sim.run()?;
    Ok(sim.into_metrics())
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self, NetsimError> {
        cfg.validate()?;
        let params = cfg.params.clone();
        let topology = cfg.topology();
        let mut key_rng = stream(cfg.seed, KEY_STREAM);
        let mut agents = BTreeMap::new();
        let mut directory = KeyDirectory::new();
        let mut founders = Vec::new();
        for (id, spec) in cfg.router_specs() {
            let key = KeyPair::generate(&mut key_rng);
            directory.insert(id, *key.public());
            founders.push((*key.public(), spec.deposit.unwrap_or(params.phi)));
            agents.insert(
                id,
                Agent {
                    address: Address::from_public_key(key.public()),
                    accounting: RouterAccounting::new(id, topology.neighbors(id))
                        .with_signer(key.clone()),
                    key,
                    behavior: spec.behavior,
                    propose: spec.propose,
                    top_up: spec.top_up,
                    active: true,
                },
            );
        }
        let mut trees = TreeCache::new(params.zeta);
        let keys: Vec<_> = founders.iter().map(|(k, _)| *k).collect();
        let root = trees.get(&keys)?.root();
        let mut ledger = Ledger::genesis(params.clone(), founders, root)?;
        let mut prices = PriceView::new();
        for l in cfg.all_links() {
            let (a, b) = (agents[&l.a].address, agents[&l.b].address);
            ledger.register_link_price(a, b, l.price)?;
            ledger.register_link_price(b, a, l.price)?;
            prices.set_link(l.a, l.b, l.price);
        }
        let seed = cfg.seed;
        Ok(Simulation {
            params,
            topology,
            prices,
            agents,
            ledger,
            trees,
            directory,
            traffic_rng: stream(seed, TRAFFIC_STREAM),
            loss_rng: stream(seed, LOSS_STREAM),
            crypto_rng: stream(seed, CRYPTO_STREAM),
            queue: EventQueue::default(),
            bus: ReportBus::default(),
            store: CycleStore::new(0, 0..=0, 0..=0),
            cycle: 0,
            cycle_start_time: 0,
            current: CycleMetrics::default(),
            metrics: Metrics::default(),
            keep_reports: false,
            report_log: Vec::new(),
            cfg,
        })
    }

    /// Keeps every accepted report for [`write_report_dump`](Self::write_report_dump).
    pub fn keep_reports(mut self, keep: bool) -> Self {
        self.keep_reports = keep;
        self
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    pub fn into_metrics(self) -> Metrics {
        self.metrics
    }

    pub fn address_of(&self, id: RouterId) -> Option<Address> {
        self.agents.get(&id).map(|a| a.address)
    }

    pub fn public_key_of(&self, id: RouterId) -> Option<PublicKey> {
        self.agents.get(&id).map(|a| *a.key.public())
    }

    pub fn trees_built(&self) -> usize {
        self.trees.builds()
    }

    /// Writes the kept reports with the reporters' keys as NDJSON.
    pub fn write_report_dump<W: Write>(&self, out: W) -> std::io::Result<()> {
        let keys: BTreeMap<_, _> = self
            .agents
            .iter()
            .map(|(id, a)| (*id, *a.key.public()))
            .collect();
        write_dump(&keys, self.report_log.iter().map(|r| r.as_ref()), out)
    }

    pub fn run(&mut self) -> Result<&Metrics, NetsimError> {
        for _ in 0..self.cfg.cycles {
            self.run_cycle()?;
        }
        Ok(&self.metrics)
    }

    fn periods(&self) -> u32 {
        self.params.periods_per_cycle() as u32
    }

    fn active_ids(&self) -> Vec<RouterId> {
        self.agents
            .iter()
            .filter(|(_, a)| a.active)
            .map(|(id, _)| *id)
            .collect()
    }

    fn run_cycle(&mut self) -> Result<(), NetsimError> {
        let start = self.ledger.height();
        let p = self.periods();
        let first_seq = self.cycle * p + 1;
        self.cycle_start_time = self.ledger.clock().time();
        let end_time = self.cycle_start_time + self.params.cycle_seconds();
        self.store = CycleStore::new(
            self.cycle,
            first_seq..=first_seq + p - 1,
            self.cycle_start_time as u32..=end_time as u32,
        );
        self.bus.clear();
        self.current = CycleMetrics {
            cycle: self.cycle,
            delivery: self
                .cfg
                .flows
                .iter()
                .map(|f| FlowDelivery {
                    source: f.source,
                    destination: f.destination,
                    offered_bytes: 0,
                    delivered_bytes: 0,
                })
                .collect(),
            ..Default::default()
        };
        for k in 1..=p {
            let height = start + (k as u64 * self.params.lambda) / self.params.gamma;
            self.queue.push(
                height,
                SimEvent::PeriodEnd {
                    seq: first_seq + k - 1,
                },
            );
        }
        self.queue
            .push(start + self.params.beta, SimEvent::CycleEnd);
        while let Some((height, event)) = self.queue.pop() {
            let now = self.ledger.height();
            if height > now {
                self.ledger.advance_blocks(height - now);
            }
            match event {
                SimEvent::PeriodEnd { seq } => self.period_end(seq)?,
                SimEvent::CycleEnd => {
                    self.cycle_end()?;
                    break;
                }
            }
        }
        self.cycle += 1;
        Ok(())
    }

    fn count_bytes(&mut self, class: MessageClass, bytes: usize) {
        *self.current.bytes.entry(class).or_default() += bytes as u64;
    }

    fn period_end(&mut self, seq: u32) -> Result<(), NetsimError> {
        self.generate_traffic();
        let timestamp = self.ledger.clock().time() as u32;
        for id in self.active_ids() {
            let agent = self.agents.get_mut(&id).unwrap();
            let mut reports =
                agent
                    .accounting
                    .emit_reports(self.cycle, seq, timestamp, &mut self.crypto_rng)?;
            if let Behavior::ReportForger {
                field,
                delta,
                neighbor,
            } = agent.behavior
            {
                for r in reports
                    .iter_mut()
                    .filter(|r| neighbor.is_none_or(|n| n == r.body.nid))
                {
                    let mut body = r.body;
                    let mut fields = body.counters.fields_mut();
                    let c = &mut fields[field.index()];
                    c.packets = c.packets.saturating_add_signed(delta);
                    c.bytes = c.bytes.saturating_add_signed(delta);
                    *r = body.sign(&agent.key)?;
                }
            }
            for r in reports {
                self.disseminate(Arc::new(r));
            }
        }
        Ok(())
    }

    fn disseminate(&mut self, report: Arc<DpifaReport>) {
        self.count_bytes(MessageClass::Dpifa, REPORT_MESSAGE_LEN);
        self.count_bytes(MessageClass::DpifaExtension, REPORT_EXTENSION_LEN);
        let b = report.body;
        if let Err(e) = self.store.ingest(report.clone(), &self.directory) {
            self.current.events.push(Event::ReportRejected {
                rid: b.rid,
                nid: b.nid,
                seq: b.seq,
                reason: e.to_string(),
            });
            return;
        }
        if self.cfg.loss_prob > 0.0 {
            for receiver in self.active_ids() {
                if receiver != b.rid && !dispatch(&mut self.loss_rng, self.cfg.loss_prob) {
                    self.bus.mark_missed(receiver, (b.rid, b.nid, b.seq));
                }
            }
        }
        if self.keep_reports {
            self.report_log.push(report.clone());
        }
        self.bus.insert(report);
    }

    fn generate_traffic(&mut self) {
        for (i, flow) in self.cfg.flows.clone().into_iter().enumerate() {
            let (src, dst) = (flow.source, flow.destination);
            if !self.agents[&src].active {
                continue;
            }
            self.current.delivery[i].offered_bytes += flow.bytes_per_period;
            if !self.agents[&dst].active {
                continue;
            }
            let Some(path) = self.topology.path(src, dst) else {
                continue;
            };
            let full = flow.bytes_per_period / flow.packet_size;
            let tail = flow.bytes_per_period % flow.packet_size;
            let mut delivered = 0;
            for (count, size) in [(full, flow.packet_size), (u64::from(tail > 0), tail)] {
                if count > 0 {
                    delivered += self.carry(&path, count, size) * size;
                }
            }
            self.current.delivery[i].delivered_bytes += delivered;
        }
    }

    /// Moves `count` packets hop by hop; returns how many reach the end.
    fn carry(&mut self, path: &[RouterId], mut count: u64, size: u64) -> u64 {
        let (src, dst) = (path[0], *path.last().unwrap());
        let source = match self.agents[&src].behavior {
            Behavior::Spoofer { victim } => victim,
            _ => src,
        };
        for w in path.windows(2) {
            let (from, to) = (w[0], w[1]);
            let out = PacketEvent {
                direction: Direction::Out,
                neighbor: to,
                size,
                originated_here: from == src,
                terminated_here: false,
                source,
            };
            self.agents
                .get_mut(&from)
                .unwrap()
                .accounting
                .record_many(&out, count);
            let inbound = PacketEvent {
                direction: Direction::In,
                neighbor: from,
                size,
                originated_here: false,
                terminated_here: to == dst,
                source,
            };
            let agent = self.agents.get_mut(&to).unwrap();
            agent.accounting.record_many(&inbound, count);
            if let (Behavior::FreeRider { drop_fraction }, false) = (agent.behavior, to == dst) {
                let dropped = match drop_fraction {
                    f if f <= 0.0 => 0,
                    f if f >= 1.0 => count,
                    f => Binomial::new(count, f)
                        .expect("fraction validated")
                        .sample(&mut self.traffic_rng),
                };
                count -= dropped;
            }
            if count == 0 {
                return 0;
            }
        }
        count
    }

    /// One round of asking originators for missing reports.
    fn recover_missing(&mut self) {
        let loss = self.cfg.loss_prob;
        let missed: Vec<(RouterId, Vec<ReportKey>)> = self
            .bus
            .missed()
            .map(|(r, keys)| (r, keys.iter().copied().collect()))
            .collect();
        for (receiver, keys) in missed {
            for key in keys {
                self.count_bytes(MessageClass::DpifaRecovery, RECOVERY_REQUEST_LEN);
                if !dispatch(&mut self.loss_rng, loss) {
                    continue;
                }
                self.count_bytes(MessageClass::DpifaRecovery, REPORT_WIRE_LEN);
                if dispatch(&mut self.loss_rng, loss) {
                    self.bus.recovered(receiver, &key);
                }
            }
        }
    }

    fn apply_top_ups(&mut self) -> Result<(), NetsimError> {
        for id in self.active_ids() {
            let agent = &self.agents[&id];
            let Some(policy) = agent.top_up else { continue };
            let address = agent.address;
            if self
                .ledger
                .state()
                .ether_value(&address)
                .is_some_and(|v| v < policy.below)
            {
                self.ledger.buy_tokens(address, policy.amount)?;
                self.current.events.push(Event::TopUp {
                    router: id,
                    wei: policy.amount,
                });
            }
        }
        Ok(())
    }

    fn expected_links(&self) -> BTreeSet<(RouterId, RouterId)> {
        self.topology
            .edges()
            .flat_map(|(a, b)| [(a, b), (b, a)])
            .collect()
    }

    fn build_view(&self, agg: &AggregatedCounters, audit: &AuditReport) -> Result<View, String> {
        let members: BTreeSet<RouterId> = self.active_ids().into_iter().collect();
        let prices = self.prices.restricted_to(&members);
        let topology = infer_topology(agg, &prices.links(), &members);
        let exclusions = Exclusions::from_audit(audit, agg);
        let entries =
            compute_entries(agg, &prices, &topology, &exclusions).map_err(|e| e.to_string())?;
        Ok(View {
            entries: entries
                .into_iter()
                .map(|(id, c)| (self.agents[&id].address, c))
                .collect(),
        })
    }

    fn cycle_end(&mut self) -> Result<(), NetsimError> {
        self.recover_missing();
        self.apply_top_ups()?;
        let expected = self.expected_links();
        let seqs = self.store.seqs();

        let full = self.bus.view(&BTreeSet::new(), &expected, seqs.clone());
        let full_audit = audit(&full);
        for v in &full_audit.violations {
            *self
                .current
                .violations
                .entry(v.criterion().to_string())
                .or_default() += 1;
        }
        let mut implicated: BTreeMap<RouterId, usize> = BTreeMap::new();
        for v in &full_audit.violations {
            for r in v.implicated() {
                *implicated.entry(r).or_default() += 1;
            }
        }

        let mut cache: HashMap<BTreeSet<ReportKey>, Rc<Result<View, String>>> = HashMap::new();
        let mut views: BTreeMap<RouterId, Rc<Result<View, String>>> = BTreeMap::new();
        for id in self.active_ids() {
            let missing = self.bus.missed_by(id);
            let view = match cache.get(&missing) {
                Some(v) => v.clone(),
                None => {
                    let agg = self.bus.view(&missing, &expected, seqs.clone());
                    let a = audit(&agg);
                    let v = Rc::new(self.build_view(&agg, &a));
                    cache.insert(missing, v.clone());
                    v
                }
            };
            views.insert(id, view);
        }

        let settled = self.run_proposals(&views)?;
        if let Some((_, outcome)) = &settled {
            self.apply_outcome(outcome);
            self.current.settled = true;
            self.current.net_entries = outcome.net_entries;
        }

        let s = self.ledger.state();
        self.current.height = self.ledger.height();
        self.current.token_supply = s.token_supply;
        self.current.ether_escrow = s.ether_escrow;
        self.current.routers = self
            .agents
            .iter()
            .map(|(id, a)| {
                let m = s.members.get(&a.address);
                RouterRow {
                    router: *id,
                    address: a.address,
                    member: m.is_some(),
                    tokens: m.map_or(0, |m| m.tokens),
                    ether_value_wei: s.ether_value(&a.address).unwrap_or(0),
                    violations: implicated.get(id).copied().unwrap_or(0),
                    entry: settled
                        .as_ref()
                        .and_then(|(stp, _)| stp.entries.get(&a.address).copied()),
                }
            })
            .collect();
        self.metrics.cycles.push(std::mem::take(&mut self.current));
        Ok(())
    }

    /// Builds, validates, confirms and submits proposals; returns the one
    /// the ledger accepted.
    fn run_proposals(
        &mut self,
        views: &BTreeMap<RouterId, Rc<Result<View, String>>>,
    ) -> Result<Option<(Stp, SettleOutcome)>, NetsimError> {
        let members = self.active_ids();
        let mut proposers: Vec<RouterId> = members
            .iter()
            .copied()
            .filter(|id| self.agents[id].propose)
            .collect();
        if proposers.is_empty() {
            return Ok(None);
        }
        let shift = self.cycle as usize % proposers.len();
        proposers.rotate_left(shift);
        let ledger_cycle = self.ledger.state().cycle;
        let timestamp = self.ledger.clock().time() as u32;

        let mut proposals = Vec::new();
        for &p in &proposers {
            let view = match views[&p].as_ref() {
                Ok(v) => v,
                Err(reason) => {
                    self.current.events.push(Event::StpBuildFailed {
                        proposer: p,
                        reason: reason.clone(),
                    });
                    continue;
                }
            };
            let agent = &self.agents[&p];
            let mut entries = view.entries.clone();
            if let Behavior::StpCheater { inflate_self_by } = agent.behavior {
                let own = entries
                    .get_mut(&agent.address)
                    .expect("proposer is a member");
                *own = own.saturating_add(inflate_self_by);
            }
            let root = match self.projected_root(&entries, agent.address) {
                Ok(r) => r,
                Err(reason) => {
                    self.current.events.push(Event::StpBuildFailed {
                        proposer: p,
                        reason,
                    });
                    continue;
                }
            };
            let nonce = self.crypto_rng.next_u32();
            let agent = &self.agents[&p];
            let stp = build_stp(
                &agent.key,
                ledger_cycle,
                self.ledger.clock().hash(),
                root,
                self.params.reward,
                entries,
                timestamp,
                nonce,
            );
            self.count_bytes(MessageClass::Stp, stp.encoded_len());
            proposals.push((p, stp));
        }
        self.current.proposals = proposals.len();

        let anchors = self.ledger.valid_anchors();
        let mut confirmed = Vec::new();
        for (p, stp) in proposals {
            let ctx_root = self.projected_root(&stp.entries, stp.proposer);
            let proposer_key = *self.agents[&p].key.public();
            let mut confirmers = Vec::new();
            for &v in members.iter().filter(|&&v| v != p) {
                let verdict = match (views[&v].as_ref(), &ctx_root) {
                    (Err(e), _) => Err(format!("no local view: {e}")),
                    (_, Err(e)) => Err(e.clone()),
                    (Ok(view), Ok(root)) => {
                        let ctx = StpContext {
                            cycle_id: self.ledger.state().cycle,
                            reward: self.params.reward,
                            proposer_key,
                            anchors: anchors.clone(),
                            membership_root: *root,
                        };
                        validate_stp(&view.entries, &stp, self.params.delta, &ctx)
                            .map_err(|e| e.to_string())
                    }
                };
                match verdict {
                    Ok(()) => {
                        let c = Confirmation::sign(&self.agents[&v].key, stp.hash());
                        self.count_bytes(MessageClass::Confirmation, CONFIRMATION_LEN);
                        if c.verify(self.agents[&v].key.public()) {
                            confirmers.push(v);
                        }
                    }
                    Err(reason) => {
                        log::debug!(
                            "cycle {}: {v} rejects proposal of {p}: {reason:?}",
                            self.cycle
                        );
                        self.current.events.push(Event::StpRejected {
                            proposer: p,
                            validator: v,
                            reason,
                        })
                    }
                }
            }
            confirmed.push((p, stp, confirmers));
        }

        let mut accepted = None;
        for (p, stp, confirmers) in confirmed {
            if accepted.is_some() || self.ledger.state().cycle != ledger_cycle {
                self.current.events.push(Event::Abandoned { proposer: p });
                continue;
            }
            let agreeing = confirmers.len() + 1;
            if !threshold_met(agreeing, members.len(), self.params.zeta) {
                let required = self.params.zeta.min_count_of(members.len());
                self.current.events.push(Event::InsufficientConfirmations {
                    proposer: p,
                    agreeing,
                    required,
                });
                continue;
            }
            let addresses = confirmers.iter().map(|c| self.agents[c].address).collect();
            let announcement = Announcement::sign(&self.agents[&p].key, stp.hash(), addresses);
            self.count_bytes(MessageClass::Confirmation, announcement.encoded_len());
            let signers: Vec<KeyPair> = std::iter::once(p)
                .chain(confirmers)
                .map(|id| self.agents[&id].key.clone())
                .collect();
            self.count_bytes(MessageClass::MuSig, MUSIG_BYTES_PER_SIGNER * signers.len());
            let (signature, agg) = sign_jointly(&signers, &stp.to_bytes(), &mut self.crypto_rng)?;
            let tree = self.trees.get(&self.ledger.state().member_keys())?;
            let auth = match prove_membership(&tree, agg.point()) {
                Ok(proof) => Authorization::MuSig {
                    signature,
                    aggregated_key: *agg.point(),
                    proof,
                },
                Err(e) => {
                    self.current.events.push(Event::SettleRejected {
                        proposer: p,
                        reason: e.to_string(),
                    });
                    continue;
                }
            };
            match self.ledger.settle(&stp, &auth) {
                Ok(outcome) => {
                    log::info!(
                        "cycle {}: settled proposal of {p} with {} signers",
                        self.cycle,
                        signers.len()
                    );
                    self.current.events.push(Event::Settled {
                        proposer: p,
                        stp_cycle: stp.cycle_id,
                        signers: signers.len(),
                    });
                    accepted = Some((stp, outcome));
                }
                Err(e) => self.current.events.push(Event::SettleRejected {
                    proposer: p,
                    reason: e.to_string(),
                }),
            }
        }
        Ok(accepted)
    }

    fn projected_root(
        &mut self,
        entries: &BTreeMap<Address, i64>,
        proposer: Address,
    ) -> Result<Hash32, String> {
        let keys = self
            .ledger
            .project_membership(entries, proposer)
            .map_err(|e| e.to_string())?;
        if keys.is_empty() {
            return Ok([0; 32]);
        }
        Ok(self.trees.get(&keys).map_err(|e| e.to_string())?.root())
    }

    fn apply_outcome(&mut self, outcome: &SettleOutcome) {
        let by_address: BTreeMap<Address, RouterId> =
            self.agents.iter().map(|(id, a)| (a.address, *id)).collect();
        let mut gone = Vec::new();
        if let Some((addr, wei)) = outcome.left {
            gone.push(by_address[&addr]);
            self.current.events.push(Event::Left {
                router: by_address[&addr],
                refund_wei: wei,
            });
        }
        for (addr, wei) in &outcome.evicted {
            gone.push(by_address[addr]);
            self.current.events.push(Event::Evicted {
                router: by_address[addr],
                refund_wei: *wei,
            });
        }
        if let Some(addr) = outcome.joined {
            self.current.events.push(Event::Joined {
                router: by_address[&addr],
            });
        }
        for id in gone {
            self.agents.get_mut(&id).unwrap().active = false;
            for n in self.topology.neighbors(id).collect::<Vec<_>>() {
                self.agents
                    .get_mut(&n)
                    .unwrap()
                    .accounting
                    .remove_neighbor(id);
            }
            self.topology.remove_node(id);
        }
    }
}
