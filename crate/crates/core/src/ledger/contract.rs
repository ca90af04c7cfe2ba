use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{ChainClock, ContractParams, LedgerError, LedgerOp};
use crate::musig::{
    verify, verify_membership, CombinationMerkleTree, KeyList, MerkleProof, MultiSignature,
    PublicKey,
};
use crate::settlement::Stp;
use crate::{Address, Hash32, SUBUNITS_PER_TOKEN, WEI_PER_ETHER};

const WEI_PER_SUBUNIT: u128 = WEI_PER_ETHER / SUBUNITS_PER_TOKEN as u128;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Member {
    pub address: Address,
    pub pubkey: PublicKey,
    /// Token balance in subunits.
    pub tokens: u128,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PendingOp {
    Join {
        address: Address,
        pubkey: PublicKey,
        /// Held apart from the escrow until the join completes.
        deposit: u128,
        #[serde(with = "crate::hexser")]
        new_root: Hash32,
    },
    Leave {
        address: Address,
        #[serde(with = "crate::hexser")]
        new_root: Hash32,
    },
}

/// Cumulative ether movements, in wei.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EtherFlows {
    pub deposits: u128,
    pub buys: u128,
    pub withdrawals: u128,
    pub redemptions: u128,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerState {
    pub params: ContractParams,
    pub members: BTreeMap<Address, Member>,
    #[serde(with = "crate::hexser")]
    pub merkle_root: Hash32,
    /// Wei backing the circulating tokens.
    pub ether_escrow: u128,
    pub token_supply: u128,
    /// Owner -> neighbor -> price in subunits per GB.
    pub price_table: BTreeMap<Address, BTreeMap<Address, u64>>,
    pub last_settle_block: u64,
    /// Settlements executed so far; the next proposal must carry this id.
    pub cycle: u32,
    pub pending_op: Option<PendingOp>,
    pub flows: EtherFlows,
}

impl LedgerState {
    fn pending_deposit(&self) -> u128 {
        match &self.pending_op {
            Some(PendingOp::Join { deposit, .. }) => *deposit,
            _ => 0,
        }
    }

    /// Checks the escrow and supply bookkeeping identities.
    pub fn is_conserved(&self) -> bool {
        let f = &self.flows;
        let inflow = f.deposits + f.buys;
        let outflow = f.withdrawals + f.redemptions;
        inflow >= outflow
            && self.ether_escrow + self.pending_deposit() == inflow - outflow
            && self.token_supply == self.members.values().map(|m| m.tokens).sum::<u128>()
    }

    /// Subunits bought by `wei` at the current rate.
    pub fn tokens_for_wei(&self, wei: u128) -> Result<u128, LedgerError> {
        if self.token_supply == 0 || self.ether_escrow == 0 {
            return Ok(wei / WEI_PER_SUBUNIT);
        }
        Ok(wei
            .checked_mul(self.token_supply)
            .ok_or(LedgerError::Overflow)?
            / self.ether_escrow)
    }

    /// Wei redeemable for `tokens` at the current rate.
    pub fn wei_for_tokens(&self, tokens: u128) -> Result<u128, LedgerError> {
        if self.token_supply == 0 {
            return Ok(0);
        }
        Ok(tokens
            .checked_mul(self.ether_escrow)
            .ok_or(LedgerError::Overflow)?
            / self.token_supply)
    }

    pub fn ether_value(&self, address: &Address) -> Option<u128> {
        self.members
            .get(address)
            .and_then(|m| self.wei_for_tokens(m.tokens).ok())
    }

    pub fn member_keys(&self) -> Vec<PublicKey> {
        self.members.values().map(|m| m.pubkey).collect()
    }

    /// The price both endpoints agree on, if any.
    pub fn link_price(&self, a: &Address, b: &Address) -> Option<u64> {
        let ab = self.price_table.get(a)?.get(b)?;
        let ba = self.price_table.get(b)?.get(a)?;
        (ab == ba).then_some(*ab)
    }

    fn payout(&mut self, address: &Address) -> Result<u128, LedgerError> {
        let member = self
            .members
            .remove(address)
            .ok_or(LedgerError::UnknownMember(*address))?;
        let wei = self.wei_for_tokens(member.tokens)?;
        self.token_supply -= member.tokens;
        self.ether_escrow -= wei;
        self.flows.withdrawals += wei;
        self.price_table.remove(address);
        for row in self.price_table.values_mut() {
            row.remove(address);
        }
        Ok(wei)
    }
}

/// Proof that the members allowed an operation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum Authorization {
    /// Plain signature of the only member.
    Single { signature: MultiSignature },
    /// Threshold multi-signature plus the key's position in the membership tree.
    MuSig {
        signature: MultiSignature,
        aggregated_key: PublicKey,
        proof: MerkleProof,
    },
}

/// What a settlement did besides applying the entries.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SettleOutcome {
    pub proposer: Option<Address>,
    pub minted: u64,
    /// Sum of all applied entries, in subunits.
    pub net_entries: i128,
    pub joined: Option<Address>,
    pub left: Option<(Address, u128)>,
    /// Members removed for falling below the minimum balance, with refund.
    pub evicted: Vec<(Address, u128)>,
}

impl SettleOutcome {
    pub fn membership_changed(&self) -> bool {
        self.joined.is_some() || self.left.is_some() || !self.evicted.is_empty()
    }
}

fn tagged(tag: &[u8], cycle: u32, root: &Hash32, new_root: &Hash32) -> Vec<u8> {
    [tag, &cycle.to_be_bytes(), root, new_root].concat()
}

/// Bytes the members sign to admit a router.
pub fn join_payload(
    cycle: u32,
    current_root: &Hash32,
    new_root: &Hash32,
    pubkey: &PublicKey,
    deposit: u128,
) -> Vec<u8> {
    let mut p = tagged(b"harpia/join", cycle, current_root, new_root);
    p.extend_from_slice(&Address::from_public_key(pubkey).0);
    p.extend_from_slice(&pubkey.to_bytes());
    p.extend_from_slice(&deposit.to_be_bytes());
    p
}

/// Bytes the members sign to release a router.
pub fn leave_payload(
    cycle: u32,
    current_root: &Hash32,
    new_root: &Hash32,
    address: &Address,
) -> Vec<u8> {
    let mut p = tagged(b"harpia/leave", cycle, current_root, new_root);
    p.extend_from_slice(&address.0);
    p
}

/// Contract state, block clock and the log of applied operations.
#[derive(Debug, Clone)]
pub struct Ledger {
    state: LedgerState,
    clock: ChainClock,
    log: Vec<LedgerOp>,
}

impl Ledger {
    /// Deploys with an implicit join of the founder at one token per ether.
    pub fn deploy(
        params: ContractParams,
        founder: PublicKey,
        deposit: u128,
    ) -> Result<Self, LedgerError> {
        let keys = KeyList::new(vec![founder])?;
        let root = CombinationMerkleTree::for_members(&keys, params.zeta)?.root();
        let mut ledger = Self::genesis(params.clone(), vec![(founder, deposit)], root)?;
        ledger.log = vec![LedgerOp::Deploy {
            params,
            founder,
            deposit,
        }];
        Ok(ledger)
    }

    /// Starts with several founders at once; `root` must commit to their
    /// threshold combinations.
    pub fn genesis(
        params: ContractParams,
        founders: Vec<(PublicKey, u128)>,
        root: Hash32,
    ) -> Result<Self, LedgerError> {
        params.validate()?;
        if founders.is_empty() {
            return Err(LedgerError::NoMembers);
        }
        let clock = ChainClock::new(params.gamma);
        let mut state = LedgerState {
            params: params.clone(),
            members: BTreeMap::new(),
            merkle_root: root,
            ether_escrow: 0,
            token_supply: 0,
            price_table: BTreeMap::new(),
            last_settle_block: clock.height(),
            cycle: 0,
            pending_op: None,
            flows: EtherFlows::default(),
        };
        for (pubkey, deposit) in &founders {
            if *deposit < params.phi {
                return Err(LedgerError::DepositBelowMinimum {
                    deposit: *deposit,
                    minimum: params.phi,
                });
            }
            let address = Address::from_public_key(pubkey);
            if state.members.contains_key(&address) {
                return Err(LedgerError::DuplicateMember(address));
            }
            let tokens = deposit / WEI_PER_SUBUNIT;
            state.members.insert(
                address,
                Member {
                    address,
                    pubkey: *pubkey,
                    tokens,
                },
            );
            state.token_supply += tokens;
            state.ether_escrow += deposit;
            state.flows.deposits += deposit;
        }
        Ok(Ledger {
            state,
            clock,
            log: vec![LedgerOp::Genesis {
                params,
                founders,
                root,
            }],
        })
    }

    pub fn state(&self) -> &LedgerState {
        &self.state
    }

    pub fn clock(&self) -> &ChainClock {
        &self.clock
    }

    pub fn params(&self) -> &ContractParams {
        &self.state.params
    }

    pub fn log(&self) -> &[LedgerOp] {
        &self.log
    }

    pub fn height(&self) -> u64 {
        self.clock.height()
    }

    pub fn advance_blocks(&mut self, blocks: u64) {
        self.clock.advance(blocks);
        self.log.push(LedgerOp::AdvanceBlocks { blocks });
    }

    /// Blocks remaining until a settlement is allowed.
    pub fn blocks_until_settle(&self) -> u64 {
        (self.state.last_settle_block + self.state.params.beta).saturating_sub(self.height())
    }

    /// Block hashes a proposal may currently be anchored to.
    pub fn valid_anchors(&self) -> BTreeSet<Hash32> {
        self.clock.recent(self.state.params.xi).collect()
    }

    /// Membership tree check followed by signature check.
    pub fn verify_musig_call(
        &self,
        payload: &[u8],
        signature: &MultiSignature,
        aggregated_key: &PublicKey,
        proof: &MerkleProof,
    ) -> bool {
        verify_membership(&self.state.merkle_root, aggregated_key, proof)
            && verify(payload, aggregated_key, signature)
    }

    fn authorize(&self, payload: &[u8], auth: &Authorization) -> Result<(), LedgerError> {
        let ok = match auth {
            Authorization::Single { signature } => {
                self.state.members.len() == 1
                    && verify(
                        payload,
                        &self.state.members.values().next().unwrap().pubkey,
                        signature,
                    )
            }
            Authorization::MuSig {
                signature,
                aggregated_key,
                proof,
            } => self.verify_musig_call(payload, signature, aggregated_key, proof),
        };
        ok.then_some(()).ok_or(LedgerError::BadAuthorization)
    }

    pub fn join(
        &mut self,
        pubkey: PublicKey,
        deposit: u128,
        new_root: Hash32,
        auth: Authorization,
    ) -> Result<(), LedgerError> {
        let s = &self.state;
        if deposit < s.params.phi {
            return Err(LedgerError::DepositBelowMinimum {
                deposit,
                minimum: s.params.phi,
            });
        }
        if s.pending_op.is_some() {
            return Err(LedgerError::PendingOccupied);
        }
        let address = Address::from_public_key(&pubkey);
        if s.members.contains_key(&address) {
            return Err(LedgerError::DuplicateMember(address));
        }
        self.authorize(
            &join_payload(s.cycle, &s.merkle_root, &new_root, &pubkey, deposit),
            &auth,
        )?;
        self.state.pending_op = Some(PendingOp::Join {
            address,
            pubkey,
            deposit,
            new_root,
        });
        self.state.flows.deposits += deposit;
        self.log.push(LedgerOp::Join {
            pubkey,
            deposit,
            new_root,
            auth,
        });
        Ok(())
    }

    pub fn leave(
        &mut self,
        address: Address,
        new_root: Hash32,
        auth: Authorization,
    ) -> Result<(), LedgerError> {
        let s = &self.state;
        if !s.members.contains_key(&address) {
            return Err(LedgerError::UnknownMember(address));
        }
        if s.pending_op.is_some() {
            return Err(LedgerError::PendingOccupied);
        }
        self.authorize(
            &leave_payload(s.cycle, &s.merkle_root, &new_root, &address),
            &auth,
        )?;
        self.state.pending_op = Some(PendingOp::Leave { address, new_root });
        self.log.push(LedgerOp::Leave {
            address,
            new_root,
            auth,
        });
        Ok(())
    }

    /// Executes a co-signed settlement proposal.
    pub fn settle(
        &mut self,
        stp: &Stp,
        auth: &Authorization,
    ) -> Result<SettleOutcome, LedgerError> {
        let s = &self.state;
        if s.members.is_empty() {
            return Err(LedgerError::NoMembers);
        }
        let height = self.height();
        if height - s.last_settle_block < s.params.beta {
            return Err(LedgerError::TooEarly {
                height,
                last: s.last_settle_block,
            });
        }
        let anchor = self
            .clock
            .height_of(&stp.anchor_block_hash)
            .ok_or(LedgerError::UnknownAnchor)?;
        if height - anchor > s.params.xi {
            return Err(LedgerError::AnchorExpired { anchor, height });
        }
        if stp.cycle_id != s.cycle {
            return Err(LedgerError::CycleMismatch {
                expected: s.cycle,
                found: stp.cycle_id,
            });
        }
        self.authorize(&stp.to_bytes(), auth)?;
        let (mut next, outcome) = apply_settlement(s, &stp.entries, stp.proposer, stp.reward)?;
        if outcome.membership_changed() {
            let declared = match &s.pending_op {
                Some(PendingOp::Join { new_root, .. } | PendingOp::Leave { new_root, .. })
                    if outcome.evicted.is_empty() =>
                {
                    Some(new_root)
                }
                _ => None,
            };
            if declared.is_some_and(|r| *r != stp.membership_root) {
                return Err(LedgerError::RootMismatch);
            }
        } else if stp.membership_root != s.merkle_root {
            return Err(LedgerError::RootMismatch);
        }
        next.merkle_root = stp.membership_root;
        next.last_settle_block = height;
        next.cycle += 1;
        self.state = next;
        self.log.push(LedgerOp::Settle {
            stp: stp.clone(),
            auth: auth.clone(),
        });
        Ok(outcome)
    }

    /// Members that would remain after settling with these entries.
    pub fn project_membership(
        &self,
        entries: &BTreeMap<Address, i64>,
        proposer: Address,
    ) -> Result<Vec<PublicKey>, LedgerError> {
        let (next, _) = apply_settlement(&self.state, entries, proposer, self.state.params.reward)?;
        Ok(next.member_keys())
    }

    pub fn register_link_price(
        &mut self,
        owner: Address,
        neighbor: Address,
        price: u64,
    ) -> Result<(), LedgerError> {
        for a in [owner, neighbor] {
            if !self.state.members.contains_key(&a) {
                return Err(LedgerError::UnknownMember(a));
            }
        }
        self.state
            .price_table
            .entry(owner)
            .or_default()
            .insert(neighbor, price);
        self.log.push(LedgerOp::RegisterLinkPrice {
            owner,
            neighbor,
            price,
        });
        Ok(())
    }

    /// Mints tokens for `wei` at the current rate; returns subunits minted.
    pub fn buy_tokens(&mut self, address: Address, wei: u128) -> Result<u128, LedgerError> {
        if !self.state.members.contains_key(&address) {
            return Err(LedgerError::UnknownMember(address));
        }
        let tokens = self.state.tokens_for_wei(wei)?;
        let s = &mut self.state;
        s.members.get_mut(&address).unwrap().tokens += tokens;
        s.token_supply += tokens;
        s.ether_escrow += wei;
        s.flows.buys += wei;
        self.log.push(LedgerOp::BuyTokens { address, wei });
        Ok(tokens)
    }

    /// Burns tokens for ether at the current rate; returns wei paid.
    pub fn redeem_tokens(&mut self, address: Address, tokens: u128) -> Result<u128, LedgerError> {
        let balance = self
            .state
            .members
            .get(&address)
            .ok_or(LedgerError::UnknownMember(address))?
            .tokens;
        if balance < tokens {
            return Err(LedgerError::InsufficientTokens);
        }
        let wei = self.state.wei_for_tokens(tokens)?;
        let s = &mut self.state;
        s.members.get_mut(&address).unwrap().tokens -= tokens;
        s.token_supply -= tokens;
        s.ether_escrow -= wei;
        s.flows.redemptions += wei;
        self.log.push(LedgerOp::RedeemTokens { address, tokens });
        Ok(wei)
    }

    pub fn read_members(&self) -> Vec<Member> {
        self.state.members.values().cloned().collect()
    }

    /// Canonical serialization of state and clock head.
    pub fn snapshot(&self) -> Vec<u8> {
        #[derive(Serialize)]
        struct Snapshot<'a> {
            height: u64,
            #[serde(with = "crate::hexser")]
            block_hash: Hash32,
            state: &'a LedgerState,
        }
        serde_json::to_vec(&Snapshot {
            height: self.height(),
            block_hash: self.clock.hash(),
            state: &self.state,
        })
        .expect("state serializes")
    }

    /// Rebuilds a ledger by re-applying a log.
    pub fn replay<I: IntoIterator<Item = LedgerOp>>(ops: I) -> Result<Self, LedgerError> {
        let mut ops = ops.into_iter();
        let mut ledger = match ops.next() {
            Some(LedgerOp::Deploy {
                params,
                founder,
                deposit,
            }) => Self::deploy(params, founder, deposit)?,
            Some(LedgerOp::Genesis {
                params,
                founders,
                root,
            }) => Self::genesis(params, founders, root)?,
            _ => {
                return Err(LedgerError::Log(
                    "log must start with deploy or genesis".into(),
                ))
            }
        };
        for op in ops {
            match op {
                LedgerOp::Deploy { .. } | LedgerOp::Genesis { .. } => {
                    return Err(LedgerError::Log("repeated deployment".into()))
                }
                LedgerOp::Join {
                    pubkey,
                    deposit,
                    new_root,
                    auth,
                } => ledger.join(pubkey, deposit, new_root, auth)?,
                LedgerOp::Leave {
                    address,
                    new_root,
                    auth,
                } => ledger.leave(address, new_root, auth)?,
                LedgerOp::Settle { stp, auth } => {
                    ledger.settle(&stp, &auth)?;
                }
                LedgerOp::RegisterLinkPrice {
                    owner,
                    neighbor,
                    price,
                } => ledger.register_link_price(owner, neighbor, price)?,
                LedgerOp::BuyTokens { address, wei } => {
                    ledger.buy_tokens(address, wei)?;
                }
                LedgerOp::RedeemTokens { address, tokens } => {
                    ledger.redeem_tokens(address, tokens)?;
                }
                LedgerOp::AdvanceBlocks { blocks } => ledger.advance_blocks(blocks),
            }
        }
        Ok(ledger)
    }
}

/// Settlement effects without authorization checks: entries, reward, pending
/// operation, then evictions below the minimum balance.
fn apply_settlement(
    state: &LedgerState,
    entries: &BTreeMap<Address, i64>,
    proposer: Address,
    reward: u64,
) -> Result<(LedgerState, SettleOutcome), LedgerError> {
    if !entries.keys().eq(state.members.keys()) {
        return Err(LedgerError::EntrySetMismatch);
    }
    if !state.members.contains_key(&proposer) {
        return Err(LedgerError::ProposerNotMember(proposer));
    }
    if reward != state.params.reward {
        return Err(LedgerError::RewardMismatch {
            expected: state.params.reward,
            found: reward,
        });
    }
    let mut next = state.clone();
    let mut outcome = SettleOutcome {
        proposer: Some(proposer),
        minted: reward,
        ..Default::default()
    };
    for (address, &delta) in entries {
        let member = next.members.get_mut(address).unwrap();
        let balance = member.tokens as i128 + delta as i128;
        if balance < 0 {
            return Err(LedgerError::InsolventMember(*address));
        }
        member.tokens = balance as u128;
        outcome.net_entries += delta as i128;
    }
    next.members.get_mut(&proposer).unwrap().tokens += reward as u128;
    next.token_supply = next.members.values().map(|m| m.tokens).sum();

    match next.pending_op.take() {
        Some(PendingOp::Join {
            address,
            pubkey,
            deposit,
            ..
        }) => {
            let tokens = next.tokens_for_wei(deposit)?;
            next.members.insert(
                address,
                Member {
                    address,
                    pubkey,
                    tokens,
                },
            );
            next.token_supply += tokens;
            next.ether_escrow += deposit;
            outcome.joined = Some(address);
        }
        Some(PendingOp::Leave { address, .. }) => {
            let wei = next.payout(&address)?;
            outcome.left = Some((address, wei));
        }
        None => {}
    }

    let tau = next.params.tau;
    let candidates: Vec<Address> = next.members.keys().copied().collect();
    for address in candidates {
        if next.ether_value(&address).is_some_and(|v| v < tau) {
            let wei = next.payout(&address)?;
            outcome.evicted.push((address, wei));
        }
    }
    Ok((next, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::musig::{prove_membership, schnorr_sign, sign_jointly, KeyPair};
    use crate::settlement::build_stp;
    use crate::Percent;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    const ETHER: u128 = WEI_PER_ETHER;
    const TOKEN: u128 = SUBUNITS_PER_TOKEN as u128;

    fn params() -> ContractParams {
        ContractParams {
            beta: 10,
            lambda: 30,
            zeta: Percent::from_whole(75),
            delta: Percent::from_whole(1),
            xi: 3,
            tau: 5 * ETHER,
            phi: 10 * ETHER,
            reward: TOKEN as u64,
            gamma: 15,
        }
    }

    struct Fixture {
        keys: Vec<KeyPair>,
        tree: CombinationMerkleTree,
        ledger: Ledger,
        rng: ChaCha20Rng,
    }

    impl Fixture {
        fn new(n: usize) -> Self {
            let mut rng = ChaCha20Rng::seed_from_u64(n as u64);
            let mut keys: Vec<_> = (0..n).map(|_| KeyPair::generate(&mut rng)).collect();
            keys.sort_by_key(|k| Address::from_public_key(k.public()));
            let list = KeyList::new(keys.iter().map(|k| *k.public()).collect()).unwrap();
            let tree = CombinationMerkleTree::for_members(&list, params().zeta).unwrap();
            let ledger = Ledger::genesis(
                params(),
                keys.iter().map(|k| (*k.public(), 10 * ETHER)).collect(),
                tree.root(),
            )
            .unwrap();
            Fixture {
                keys,
                tree,
                ledger,
                rng,
            }
        }

        fn addr(&self, i: usize) -> Address {
            Address::from_public_key(self.keys[i].public())
        }

        fn bundle(&mut self, signers: &[usize], payload: &[u8]) -> Authorization {
            let ks: Vec<_> = signers.iter().map(|&i| self.keys[i].clone()).collect();
            let (signature, agg) = sign_jointly(&ks, payload, &mut self.rng).unwrap();
            let proof = prove_membership(&self.tree, agg.point()).unwrap();
            Authorization::MuSig {
                signature,
                aggregated_key: *agg.point(),
                proof,
            }
        }

        fn stp(&self, entries: &[i64], root: Hash32) -> Stp {
            let entries = (0..self.keys.len())
                .map(|i| (self.addr(i), entries[i]))
                .collect();
            let l = &self.ledger;
            build_stp(
                &self.keys[0],
                l.state().cycle,
                l.clock().hash(),
                root,
                l.params().reward,
                entries,
                0,
                0,
            )
        }

        fn settle(
            &mut self,
            entries: &[i64],
            signers: &[usize],
        ) -> Result<SettleOutcome, LedgerError> {
            let stp = self.stp(entries, self.ledger.state().merkle_root);
            let auth = self.bundle(signers, &stp.to_bytes());
            self.ledger.settle(&stp, &auth)
        }
    }

    #[test]
    fn deploy_is_one_token_per_ether() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let k = KeyPair::generate(&mut rng);
        let l = Ledger::deploy(params(), *k.public(), 10 * ETHER).unwrap();
        let s = l.state();
        assert_eq!(s.members.values().next().unwrap().tokens, 10 * TOKEN);
        assert_eq!((s.token_supply, s.ether_escrow), (10 * TOKEN, 10 * ETHER));
        assert_eq!(s.tokens_for_wei(ETHER).unwrap(), TOKEN);
        assert!(s.is_conserved());
        assert!(matches!(
            Ledger::deploy(params(), *k.public(), 10 * ETHER - 1),
            Err(LedgerError::DepositBelowMinimum { .. })
        ));
    }

    #[test]
    fn single_member_admits_with_plain_signature() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let founder = KeyPair::generate(&mut rng);
        let joiner = KeyPair::generate(&mut rng);
        let mut l = Ledger::deploy(params(), *founder.public(), 10 * ETHER).unwrap();
        let both = KeyList::new(vec![*founder.public(), *joiner.public()]).unwrap();
        let new_root = CombinationMerkleTree::for_members(&both, params().zeta)
            .unwrap()
            .root();
        let s = l.state();
        let payload = join_payload(
            s.cycle,
            &s.merkle_root,
            &new_root,
            joiner.public(),
            20 * ETHER,
        );
        let forged = schnorr_sign(&joiner, &payload, &mut rng);
        assert_eq!(
            l.join(
                *joiner.public(),
                20 * ETHER,
                new_root,
                Authorization::Single { signature: forged }
            ),
            Err(LedgerError::BadAuthorization)
        );
        let signature = schnorr_sign(&founder, &payload, &mut rng);
        l.join(
            *joiner.public(),
            20 * ETHER,
            new_root,
            Authorization::Single { signature },
        )
        .unwrap();
        assert!(l.state().is_conserved());
        assert_eq!(
            l.join(
                *joiner.public(),
                20 * ETHER,
                new_root,
                Authorization::Single { signature }
            ),
            Err(LedgerError::PendingOccupied)
        );

        l.advance_blocks(10);
        let fa = Address::from_public_key(founder.public());
        let stp = build_stp(
            &founder,
            0,
            l.clock().hash(),
            new_root,
            TOKEN as u64,
            [(fa, 0)].into(),
            0,
            0,
        );
        let signature = schnorr_sign(&founder, &stp.to_bytes(), &mut rng);
        let out = l
            .settle(&stp, &Authorization::Single { signature })
            .unwrap();
        assert_eq!(out.joined, Some(Address::from_public_key(joiner.public())));
        let s = l.state();
        assert_eq!(s.merkle_root, new_root);
        // founder holds 11 tokens backed by 10 ether; 20 ether buys 22 tokens
        assert_eq!(s.members[&out.joined.unwrap()].tokens, 22 * TOKEN);
        assert_eq!(s.ether_escrow, 30 * ETHER);
        assert!(s.is_conserved());
    }

    #[test]
    fn three_of_four_settle_mints_reward_plus_entries() {
        let mut f = Fixture::new(4);
        f.ledger.advance_blocks(10);
        let before = f.ledger.state().clone();
        let entries = [2 * TOKEN as i64, -(TOKEN as i64), 0, -(TOKEN as i64) / 2];
        let out = f.settle(&entries, &[0, 1, 3]).unwrap();
        let s = f.ledger.state();
        assert_eq!(out.net_entries, TOKEN as i128 / 2);
        assert_eq!(s.token_supply, before.token_supply + TOKEN + TOKEN / 2);
        assert_eq!(s.members[&f.addr(0)].tokens, 13 * TOKEN);
        assert_eq!(s.ether_escrow, before.ether_escrow);
        assert!(s.wei_for_tokens(TOKEN).unwrap() < before.wei_for_tokens(TOKEN).unwrap());
        assert_eq!((s.cycle, s.last_settle_block), (1, 10));
        assert!(s.is_conserved());
    }

    #[test]
    fn settle_timing_rules() {
        let mut f = Fixture::new(4);
        f.ledger.advance_blocks(9);
        assert!(matches!(
            f.settle(&[0; 4], &[0, 1, 2]),
            Err(LedgerError::TooEarly { .. })
        ));
        f.ledger.advance_blocks(1);
        let stp = f.stp(&[0; 4], f.tree.root());
        let auth = f.bundle(&[0, 1, 2], &stp.to_bytes());
        f.ledger.settle(&stp, &auth).unwrap();
        assert!(matches!(
            f.ledger.settle(&stp, &auth),
            Err(LedgerError::TooEarly { .. })
        ));
        f.ledger.advance_blocks(10);
        assert!(matches!(
            f.ledger.settle(&stp, &auth),
            Err(LedgerError::AnchorExpired { .. })
        ));

        let stale = f.stp(&[0; 4], f.tree.root());
        f.ledger.advance_blocks(3);
        let auth = f.bundle(&[0, 1, 2], &stale.to_bytes());
        assert!(f.ledger.settle(&stale.clone(), &auth).is_ok());
        let mut g = Fixture::new(4);
        g.ledger.advance_blocks(10);
        let stale = g.stp(&[0; 4], g.tree.root());
        g.ledger.advance_blocks(4);
        let auth = g.bundle(&[0, 1, 2], &stale.to_bytes());
        assert_eq!(
            g.ledger.settle(&stale, &auth),
            Err(LedgerError::AnchorExpired {
                anchor: 10,
                height: 14
            })
        );
    }

    #[test]
    fn bad_multisignatures_rejected() {
        let mut f = Fixture::new(4);
        f.ledger.advance_blocks(10);
        let stp = f.stp(&[0; 4], f.tree.root());
        // too few signers: key is not a leaf
        let (signature, agg) = sign_jointly(&f.keys[..2], &stp.to_bytes(), &mut f.rng).unwrap();
        let proof = f.tree.proof_for_index(0);
        let auth = Authorization::MuSig {
            signature,
            aggregated_key: *agg.point(),
            proof,
        };
        assert_eq!(
            f.ledger.settle(&stp, &auth),
            Err(LedgerError::BadAuthorization)
        );
        // valid key, signature over a different payload
        let auth = f.bundle(&[0, 1, 2], b"something else");
        assert_eq!(
            f.ledger.settle(&stp, &auth),
            Err(LedgerError::BadAuthorization)
        );
        // single-member path not available with four members
        let signature = schnorr_sign(&f.keys[0], &stp.to_bytes(), &mut f.rng);
        assert_eq!(
            f.ledger.settle(&stp, &Authorization::Single { signature }),
            Err(LedgerError::BadAuthorization)
        );
        assert_eq!(f.ledger.state().cycle, 0);
    }

    #[test]
    fn settle_content_checks() {
        let mut f = Fixture::new(4);
        f.ledger.advance_blocks(10);
        let e = -(11 * TOKEN as i64);
        assert_eq!(
            f.settle(&[0, 0, e, 0], &[0, 1, 2]),
            Err(LedgerError::InsolventMember(f.addr(2)))
        );
        assert!(f.settle(&[0; 4], &[0, 1, 2]).map(|_| ()).is_ok());

        let mut f = Fixture::new(4);
        f.ledger.advance_blocks(10);
        let stp = f.stp(&[0; 4], [1; 32]);
        let auth = f.bundle(&[0, 1, 2], &stp.to_bytes());
        assert_eq!(f.ledger.settle(&stp, &auth), Err(LedgerError::RootMismatch));
        let mut stp = f.stp(&[0; 4], f.tree.root());
        stp.entries.pop_last();
        let stp = build_stp(
            &f.keys[0],
            0,
            stp.anchor_block_hash,
            stp.membership_root,
            stp.reward,
            stp.entries,
            0,
            0,
        );
        let auth = f.bundle(&[0, 1, 2], &stp.to_bytes());
        assert_eq!(
            f.ledger.settle(&stp, &auth),
            Err(LedgerError::EntrySetMismatch)
        );
    }

    #[test]
    fn low_balance_member_is_evicted_with_refund() {
        let mut f = Fixture::new(4);
        f.ledger.advance_blocks(10);
        let t = TOKEN as i64;
        let entries = [6 * t, -6 * t, 0, 0];
        let survivors: Vec<_> = f
            .keys
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != 1)
            .map(|(_, k)| *k.public())
            .collect();
        let projected = f.ledger.project_membership(
            &(0..4).map(|i| (f.addr(i), entries[i])).collect(),
            f.addr(0),
        );
        assert_eq!(projected.unwrap(), survivors);
        let new_root =
            CombinationMerkleTree::for_members(&KeyList::new(survivors).unwrap(), params().zeta)
                .unwrap()
                .root();
        let stp = f.stp(&entries, new_root);
        let auth = f.bundle(&[0, 2, 3], &stp.to_bytes());
        let out = f.ledger.settle(&stp, &auth).unwrap();
        assert_eq!(out.evicted.len(), 1);
        let (who, refund) = out.evicted[0];
        assert_eq!(who, f.addr(1));
        // 4 tokens at 40 ether / 41 tokens after the reward
        assert_eq!(refund, 4 * TOKEN * 40 * ETHER / (41 * TOKEN));
        let s = f.ledger.state();
        assert_eq!(s.members.len(), 3);
        assert_eq!(s.merkle_root, new_root);
        assert!(s.is_conserved());
    }

    #[test]
    fn leave_pays_out_at_settle() {
        let mut f = Fixture::new(4);
        let rest: Vec<_> = [0, 1, 2].iter().map(|&i| *f.keys[i].public()).collect();
        let new_root =
            CombinationMerkleTree::for_members(&KeyList::new(rest).unwrap(), params().zeta)
                .unwrap()
                .root();
        let who = f.addr(3);
        let payload = leave_payload(0, &f.tree.root(), &new_root, &who);
        let auth = f.bundle(&[0, 1, 3], &payload);
        f.ledger.leave(who, new_root, auth).unwrap();
        f.ledger.advance_blocks(10);
        assert_eq!(
            f.settle(&[0; 4], &[0, 1, 2]),
            Err(LedgerError::RootMismatch)
        );
        let stp = f.stp(&[0; 4], new_root);
        let auth = f.bundle(&[0, 1, 2], &stp.to_bytes());
        let out = f.ledger.settle(&stp, &auth).unwrap();
        assert_eq!(
            out.left,
            Some((who, 10 * TOKEN * 40 * ETHER / (41 * TOKEN)))
        );
        assert!(f.ledger.state().is_conserved());
    }

    #[test]
    fn buy_redeem_and_prices() {
        let mut f = Fixture::new(4);
        let (a, b) = (f.addr(0), f.addr(1));
        assert_eq!(f.ledger.buy_tokens(a, 2 * ETHER).unwrap(), 2 * TOKEN);
        assert_eq!(f.ledger.redeem_tokens(a, 12 * TOKEN).unwrap(), 12 * ETHER);
        assert_eq!(
            f.ledger.redeem_tokens(a, 1),
            Err(LedgerError::InsufficientTokens)
        );
        f.ledger.register_link_price(a, b, 5).unwrap();
        assert_eq!(f.ledger.state().link_price(&a, &b), None);
        f.ledger.register_link_price(b, a, 5).unwrap();
        assert_eq!(f.ledger.state().link_price(&a, &b), Some(5));
        assert!(f.ledger.state().is_conserved());
    }

    #[test]
    fn replay_reproduces_snapshot() {
        let mut f = Fixture::new(4);
        f.ledger.buy_tokens(f.addr(2), 3 * ETHER).unwrap();
        f.ledger.advance_blocks(10);
        f.settle(&[1, -1, 5, 0], &[1, 2, 3]).unwrap();
        let mut buf = Vec::new();
        super::super::write_log(f.ledger.log(), &mut buf).unwrap();
        let ops = super::super::read_log(&buf[..]).unwrap();
        let replayed = Ledger::replay(ops).unwrap();
        assert_eq!(replayed.snapshot(), f.ledger.snapshot());
    }
}
