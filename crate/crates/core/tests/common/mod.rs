//! Helpers shared by the integration targets.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use harpia_core::ledger::{
    join_payload, leave_payload, Authorization, ContractParams, Ledger, LedgerError, SettleOutcome,
};
use harpia_core::musig::{
    prove_membership, schnorr_sign, sign_jointly, CombinationMerkleTree, KeyList, KeyPair,
    PublicKey, Scalar,
};
use harpia_core::netsim::{FlowSpec, LinkSpec, RouterSpec, SimConfig};
use harpia_core::settlement::{build_stp, Stp};
use harpia_core::{Address, Hash32, Percent, RouterId, SUBUNITS_PER_TOKEN, WEI_PER_ETHER};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub const ETHER: u128 = WEI_PER_ETHER;
pub const TOKEN: u128 = SUBUNITS_PER_TOKEN as u128;

pub fn r(i: u32) -> RouterId {
    RouterId(i)
}

/// Short cycles so simulations stay quick: 240 blocks of 15 s, 10-minute periods.
pub fn sim_params() -> ContractParams {
    ContractParams {
        beta: 240,
        lambda: 600,
        zeta: Percent::from_whole(75),
        delta: Percent::from_whole(1),
        xi: 20,
        tau: 5 * ETHER,
        phi: 10 * ETHER,
        reward: SUBUNITS_PER_TOKEN,
        gamma: 15,
    }
}

pub fn flow(s: u32, d: u32, bytes: u64) -> FlowSpec {
    FlowSpec {
        source: r(s),
        destination: r(d),
        bytes_per_period: bytes,
        packet_size: 1500,
    }
}

/// Square a-b-c-d-a; a and d propose, b and c only confirm.
pub fn four_router_fixture() -> SimConfig {
    let link = |x, y| LinkSpec {
        a: r(x),
        b: r(y),
        price: SUBUNITS_PER_TOKEN,
    };
    SimConfig {
        seed: 2,
        cycles: 1,
        loss_prob: 0.0,
        params: sim_params(),
        generate: None,
        links: vec![link(0, 1), link(1, 2), link(2, 3), link(3, 0)],
        routers: [1, 2]
            .iter()
            .map(|&i| RouterSpec {
                propose: false,
                ..RouterSpec::new(r(i))
            })
            .collect(),
        flows: vec![
            flow(0, 2, 5_000_000),
            flow(3, 1, 5_000_000),
            flow(1, 3, 700_000),
        ],
    }
}

/// Counts of what a driver run did.
#[derive(Debug, Default, Clone)]
pub struct DriverStats {
    pub ops: usize,
    pub applied: usize,
    pub rejected: BTreeMap<String, usize>,
    pub settles: usize,
    pub joins: usize,
    pub leaves: usize,
    pub evictions: usize,
}

impl DriverStats {
    pub fn rejections(&self, kind: &str) -> usize {
        self.rejected.get(kind).copied().unwrap_or(0)
    }
}

/// Applies random contract calls and checks the bookkeeping identities after
/// each one. Rejected calls must leave the state untouched.
pub struct LedgerDriver {
    pub ledger: Ledger,
    keys: BTreeMap<Address, KeyPair>,
    trees: HashMap<Vec<Address>, CombinationMerkleTree>,
    rng: ChaCha20Rng,
    pub stats: DriverStats,
}

const MAX_MEMBERS: usize = 6;

fn variant(e: &LedgerError) -> String {
    let dbg = format!("{e:?}");
    dbg.split(|c: char| !c.is_alphanumeric())
        .next()
        .unwrap_or_default()
        .to_string()
}

impl LedgerDriver {
    pub fn params() -> ContractParams {
        ContractParams {
            beta: 10,
            lambda: 30,
            zeta: Percent::from_whole(75),
            delta: Percent::from_whole(1),
            xi: 3,
            tau: 5 * ETHER,
            phi: 10 * ETHER,
            reward: SUBUNITS_PER_TOKEN,
            gamma: 15,
        }
    }

    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let founders: Vec<KeyPair> = (0..3).map(|_| KeyPair::generate(&mut rng)).collect();
        let mut driver = LedgerDriver {
            ledger: Ledger::deploy(Self::params(), *founders[0].public(), 10 * ETHER).unwrap(),
            keys: BTreeMap::new(),
            trees: HashMap::new(),
            rng,
            stats: DriverStats::default(),
        };
        let root = driver
            .tree_for(&founders.iter().map(|k| *k.public()).collect::<Vec<_>>())
            .root();
        let deposits = founders
            .iter()
            .map(|k| {
                (
                    *k.public(),
                    10 * ETHER + driver.rng.gen_range(0..10) * ETHER,
                )
            })
            .collect();
        driver.ledger = Ledger::genesis(Self::params(), deposits, root).unwrap();
        for k in founders {
            driver.keys.insert(Address::from_public_key(k.public()), k);
        }
        driver
    }

    fn tree_for(&mut self, members: &[PublicKey]) -> &CombinationMerkleTree {
        let mut addrs: Vec<Address> = members.iter().map(Address::from_public_key).collect();
        addrs.sort();
        let zeta = self.ledger.params().zeta;
        self.trees.entry(addrs).or_insert_with(|| {
            CombinationMerkleTree::for_members(&KeyList::new(members.to_vec()).unwrap(), zeta)
                .unwrap()
        })
    }

    pub fn members(&self) -> Vec<Address> {
        self.ledger.state().members.keys().copied().collect()
    }

    fn pick_member(&mut self) -> Address {
        let m = self.members();
        m[self.rng.gen_range(0..m.len())]
    }

    /// Authorization from every current member.
    pub fn authorize(&mut self, payload: &[u8]) -> Authorization {
        let members = self.members();
        if members.len() == 1 {
            let signature = schnorr_sign(&self.keys[&members[0]], payload, &mut self.rng);
            return Authorization::Single { signature };
        }
        let signers: Vec<KeyPair> = members.iter().map(|a| self.keys[a].clone()).collect();
        let (signature, agg) = sign_jointly(&signers, payload, &mut self.rng).unwrap();
        let publics = self.ledger.state().member_keys();
        let proof = prove_membership(self.tree_for(&publics), agg.point()).unwrap();
        Authorization::MuSig {
            signature,
            aggregated_key: *agg.point(),
            proof,
        }
    }

    fn root_of(&mut self, keys: &[PublicKey]) -> Hash32 {
        if keys.is_empty() {
            return [0; 32];
        }
        self.tree_for(keys).root()
    }

    /// A proposal from a random member, anchored to the head unless `anchor` is given.
    fn proposal(&mut self, anchor: Option<Hash32>) -> Option<Stp> {
        let members = self.members();
        let proposer = self.pick_member();
        let insolvent = self.rng.gen_ratio(1, 20);
        let entries: BTreeMap<Address, i64> = members
            .iter()
            .map(|a| {
                let delta = if insolvent && *a == proposer {
                    -(self.ledger.state().members[a].tokens as i64) - 1
                } else {
                    self.rng.gen_range(-3 * TOKEN as i64..=2 * TOKEN as i64)
                };
                (*a, delta)
            })
            .collect();
        let projected = self
            .ledger
            .project_membership(&entries, proposer)
            .unwrap_or_default();
        if projected.is_empty() && !insolvent {
            return None;
        }
        let root = self.root_of(&projected);
        let l = &self.ledger;
        let anchor = anchor.unwrap_or_else(|| l.clock().hash());
        Some(build_stp(
            &self.keys[&proposer],
            l.state().cycle,
            anchor,
            root,
            l.params().reward,
            entries,
            0,
            0,
        ))
    }

    fn record(&mut self, result: Result<(), LedgerError>, before: Option<Vec<u8>>) {
        self.stats.ops += 1;
        match result {
            Ok(()) => self.stats.applied += 1,
            Err(e) => {
                *self.stats.rejected.entry(variant(&e)).or_default() += 1;
                if let Some(before) = before {
                    assert_eq!(
                        before,
                        self.ledger.snapshot(),
                        "rejected {e:?} changed state"
                    );
                }
            }
        }
        let s = self.ledger.state();
        assert!(
            s.is_conserved(),
            "bookkeeping broken after op {}",
            self.stats.ops
        );
        assert!(!s.members.is_empty());
    }

    fn settle(&mut self, stp: Stp, auth: Authorization) -> Result<(), LedgerError> {
        let tau = self.ledger.params().tau;
        let cycle = self.ledger.state().cycle;
        let out = self.ledger.settle(&stp, &auth)?;
        let s = self.ledger.state();
        assert_eq!(s.cycle, cycle + 1);
        assert!(
            s.members.keys().all(|a| s.ether_value(a).unwrap() >= tau),
            "member below minimum survived"
        );
        self.stats.settles += 1;
        self.stats.evictions += out.evicted.len();
        self.stats.joins += out.joined.is_some() as usize;
        self.stats.leaves += out.left.is_some() as usize;
        Ok(())
    }

    pub fn step(&mut self) {
        let before = Some(self.ledger.snapshot());
        let roll = self.rng.gen_range(0..100);
        let result = match roll {
            0..=19 => {
                let blocks = self.rng.gen_range(1..=12);
                self.ledger.advance_blocks(blocks);
                self.record(Ok(()), None);
                return;
            }
            20..=29 => {
                let who = self.pick_member();
                let wei = self.rng.gen_range(1..=5 * ETHER);
                self.ledger.buy_tokens(who, wei).map(drop)
            }
            30..=37 => {
                let who = self.pick_member();
                let balance = self.ledger.state().members[&who].tokens;
                let tokens = if self.rng.gen_ratio(1, 10) {
                    balance + 1
                } else {
                    self.rng.gen_range(0..=balance / 3)
                };
                self.ledger.redeem_tokens(who, tokens).map(drop)
            }
            38..=45 => {
                let a = self.pick_member();
                let b = self.pick_member();
                let price = self.rng.gen_range(0..3 * SUBUNITS_PER_TOKEN);
                self.ledger.register_link_price(a, b, price)
            }
            46..=53 => self.try_join(),
            54..=57 => self.try_leave(),
            58..=89 => match self.proposal(None) {
                Some(stp) => {
                    let auth = self.authorize(&stp.to_bytes());
                    self.settle(stp, auth)
                }
                None => Ok(()),
            },
            90..=94 => self.bad_settle(),
            _ => {
                let xi = self.ledger.params().xi;
                let h = self.ledger.height();
                match h
                    .checked_sub(xi + 1)
                    .and_then(|old| self.ledger.clock().hash_at(old))
                {
                    Some(stale) => match self.proposal(Some(stale)) {
                        Some(stp) => {
                            let auth = self.authorize(&stp.to_bytes());
                            self.settle(stp, auth)
                        }
                        None => Ok(()),
                    },
                    None => Ok(()),
                }
            }
        };
        self.record(result, before);
    }

    fn try_join(&mut self) -> Result<(), LedgerError> {
        if self.ledger.state().members.len() >= MAX_MEMBERS {
            return Ok(());
        }
        let joiner = KeyPair::generate(&mut self.rng);
        let phi = self.ledger.params().phi;
        let deposit = if self.rng.gen_ratio(1, 10) {
            phi - 1
        } else {
            phi + self.rng.gen_range(0..2 * phi)
        };
        let mut keys = self.ledger.state().member_keys();
        keys.push(*joiner.public());
        let new_root = self.root_of(&keys);
        let s = self.ledger.state();
        let payload = join_payload(s.cycle, &s.merkle_root, &new_root, joiner.public(), deposit);
        let auth = self.authorize(&payload);
        self.keys
            .insert(Address::from_public_key(joiner.public()), joiner.clone());
        self.ledger.join(*joiner.public(), deposit, new_root, auth)
    }

    fn try_leave(&mut self) -> Result<(), LedgerError> {
        if self.ledger.state().members.len() < 2 {
            return Ok(());
        }
        let who = self.pick_member();
        let keys: Vec<PublicKey> = self
            .ledger
            .state()
            .members
            .values()
            .filter(|m| m.address != who)
            .map(|m| m.pubkey)
            .collect();
        let new_root = self.root_of(&keys);
        let s = self.ledger.state();
        let payload = leave_payload(s.cycle, &s.merkle_root, &new_root, &who);
        let auth = self.authorize(&payload);
        self.ledger.leave(who, new_root, auth)
    }

    /// Valid in every respect except the multi-signature.
    fn bad_settle(&mut self) -> Result<(), LedgerError> {
        let Some(stp) = self.proposal(None) else {
            return Ok(());
        };
        let mut other = stp.clone();
        other.nonce ^= 1;
        let auth = match self.rng.gen_range(0..3) {
            0 => self.authorize(&other.to_bytes()),
            1 => match self.authorize(&stp.to_bytes()) {
                Authorization::MuSig {
                    mut signature,
                    aggregated_key,
                    proof,
                } => {
                    signature.scalar_sum += Scalar::ONE;
                    Authorization::MuSig {
                        signature,
                        aggregated_key,
                        proof,
                    }
                }
                Authorization::Single { mut signature } => {
                    signature.scalar_sum += Scalar::ONE;
                    Authorization::Single { signature }
                }
            },
            _ => {
                // key outside the membership tree
                let stranger = KeyPair::generate(&mut self.rng);
                let (signature, agg) =
                    sign_jointly(&[stranger], &stp.to_bytes(), &mut self.rng).unwrap();
                let keys = self.ledger.state().member_keys();
                let proof = self.tree_for(&keys).proof_for_index(0);
                Authorization::MuSig {
                    signature,
                    aggregated_key: *agg.point(),
                    proof,
                }
            }
        };
        let before = self.ledger.snapshot();
        let result = self.ledger.settle(&stp, &auth);
        if let Ok(out) = &result {
            panic!("forged authorization accepted: {out:?}");
        }
        assert_eq!(before, self.ledger.snapshot());
        result.map(drop)
    }

    /// Settles `entries` proposed by `proposer`, signed by every member.
    pub fn settle_with(
        &mut self,
        proposer: Address,
        entries: BTreeMap<Address, i64>,
    ) -> Result<SettleOutcome, LedgerError> {
        let projected = self.ledger.project_membership(&entries, proposer)?;
        let root = self.root_of(&projected);
        let l = &self.ledger;
        let stp = build_stp(
            &self.keys[&proposer],
            l.state().cycle,
            l.clock().hash(),
            root,
            l.params().reward,
            entries,
            0,
            0,
        );
        let auth = self.authorize(&stp.to_bytes());
        self.ledger.settle(&stp, &auth)
    }

    pub fn run(&mut self, ops: usize) -> &DriverStats {
        for _ in 0..ops {
            self.step();
        }
        &self.stats
    }
}
