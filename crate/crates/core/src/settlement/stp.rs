use std::collections::{BTreeMap, BTreeSet};

use sha2::{Digest, Sha256};

use super::SettlementError;
use crate::identity::{ecdsa_sign, ecdsa_verify, ECDSA_SIGNATURE_LEN};
use crate::musig::{KeyPair, PublicKey};
use crate::{Address, Hash32, Percent};

const STP_VERSION: u8 = 1;
const STP_FIXED_LEN: usize = 1 + 20 + 4 + 32 + 32 + 8 + 4 + 4 + 4;
const ENTRY_LEN: usize = 20 + 8;
const CONFIRM_TAG: &[u8] = b"harpia/confirm";
const ANNOUNCE_TAG: &[u8] = b"harpia/announce";

/// Encoded STP size for `n` entries, signature included.
pub const fn stp_len(n: usize) -> usize {
    STP_FIXED_LEN + ENTRY_LEN * n + ECDSA_SIGNATURE_LEN
}

pub const CONFIRMATION_LEN: usize = 32 + 20 + ECDSA_SIGNATURE_LEN;

pub const fn announcement_len(confirmers: usize) -> usize {
    32 + 4 + 20 * confirmers + ECDSA_SIGNATURE_LEN
}

/// A proposed settlement for one cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stp {
    pub proposer: Address,
    pub cycle_id: u32,
    /// A recent block the proposal is anchored to.
    pub anchor_block_hash: Hash32,
    /// Membership commitment that holds once this settlement is applied.
    pub membership_root: Hash32,
    pub reward: u64,
    /// Credit delta per member, in token subunits.
    pub entries: BTreeMap<Address, i64>,
    pub timestamp: u32,
    pub nonce: u32,
    pub proposer_signature: [u8; ECDSA_SIGNATURE_LEN],
}

impl Stp {
    /// Everything covered by the proposer signature.
    pub fn body_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(stp_len(self.entries.len()));
        out.push(STP_VERSION);
        out.extend_from_slice(&self.proposer.0);
        out.extend_from_slice(&self.cycle_id.to_be_bytes());
        out.extend_from_slice(&self.anchor_block_hash);
        out.extend_from_slice(&self.membership_root);
        out.extend_from_slice(&self.reward.to_be_bytes());
        out.extend_from_slice(&self.timestamp.to_be_bytes());
        out.extend_from_slice(&self.nonce.to_be_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_be_bytes());
        for (addr, delta) in &self.entries {
            out.extend_from_slice(&addr.0);
            out.extend_from_slice(&delta.to_be_bytes());
        }
        out
    }

    /// Canonical encoding; also the message the members multi-sign.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.body_bytes();
        out.extend_from_slice(&self.proposer_signature);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SettlementError> {
        let mut r = Reader(bytes);
        if r.take::<1>()?[0] != STP_VERSION {
            return Err(SettlementError::Malformed);
        }
        let proposer = Address(r.take()?);
        let cycle_id = u32::from_be_bytes(r.take()?);
        let anchor_block_hash = r.take()?;
        let membership_root = r.take()?;
        let reward = u64::from_be_bytes(r.take()?);
        let timestamp = u32::from_be_bytes(r.take()?);
        let nonce = u32::from_be_bytes(r.take()?);
        let count = u32::from_be_bytes(r.take()?) as usize;
        if r.0.len() != count * ENTRY_LEN + ECDSA_SIGNATURE_LEN {
            return Err(SettlementError::Malformed);
        }
        let mut entries = BTreeMap::new();
        let mut last = None;
        for _ in 0..count {
            let addr = Address(r.take()?);
            if last.is_some_and(|l| l >= addr) {
                return Err(SettlementError::Malformed);
            }
            last = Some(addr);
            entries.insert(addr, i64::from_be_bytes(r.take()?));
        }
        let proposer_signature = r.take()?;
        Ok(Stp {
            proposer,
            cycle_id,
            anchor_block_hash,
            membership_root,
            reward,
            entries,
            timestamp,
            nonce,
            proposer_signature,
        })
    }

    pub fn hash(&self) -> Hash32 {
        Sha256::digest(self.to_bytes()).into()
    }

    pub fn encoded_len(&self) -> usize {
        stp_len(self.entries.len())
    }

    pub fn verify_proposer(&self, key: &PublicKey) -> bool {
        Address::from_public_key(key) == self.proposer
            && ecdsa_verify(key, &self.body_bytes(), &self.proposer_signature)
    }
}

struct Reader<'a>(&'a [u8]);

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], SettlementError> {
        if self.0.len() < N {
            return Err(SettlementError::Malformed);
        }
        let (head, rest) = self.0.split_at(N);
        self.0 = rest;
        Ok(head.try_into().unwrap())
    }
}

/// Assembles and signs a proposal.
#[allow(clippy::too_many_arguments)]
pub fn build_stp(
    proposer: &KeyPair,
    cycle_id: u32,
    anchor_block_hash: Hash32,
    membership_root: Hash32,
    reward: u64,
    entries: BTreeMap<Address, i64>,
    timestamp: u32,
    nonce: u32,
) -> Stp {
    let mut stp = Stp {
        proposer: Address::from_public_key(proposer.public()),
        cycle_id,
        anchor_block_hash,
        membership_root,
        reward,
        entries,
        timestamp,
        nonce,
        proposer_signature: [0; ECDSA_SIGNATURE_LEN],
    };
    stp.proposer_signature = ecdsa_sign(proposer, &stp.body_bytes());
    stp
}

/// What a validator expects a proposal for this cycle to look like.
#[derive(Debug, Clone)]
pub struct StpContext {
    pub cycle_id: u32,
    pub reward: u64,
    pub proposer_key: PublicKey,
    /// Block hashes still acceptable as anchors.
    pub anchors: BTreeSet<Hash32>,
    pub membership_root: Hash32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StpRejection {
    #[error("proposer signature does not verify")]
    BadSignature,
    #[error("cycle {found} does not match expected {expected}")]
    CycleMismatch { expected: u32, found: u32 },
    #[error("anchor block is unknown or expired")]
    AnchorInvalid,
    #[error("reward {found} does not match {expected}")]
    RewardMismatch { expected: u64, found: u64 },
    #[error("membership root differs from local projection")]
    RootMismatch,
    #[error("entry set differs from local membership")]
    EntrySetMismatch,
    #[error("entry for {address:?} is {proposed}, local value {local}")]
    EntryOutOfTolerance {
        address: Address,
        proposed: i64,
        local: i64,
    },
}

/// Accepts `stp` if every entry is within `delta` percent of the local value.
///
/// One subunit of slack absorbs rounding.
pub fn validate_stp(
    local: &BTreeMap<Address, i64>,
    stp: &Stp,
    delta: Percent,
    ctx: &StpContext,
) -> Result<(), StpRejection> {
    if !stp.verify_proposer(&ctx.proposer_key) {
        return Err(StpRejection::BadSignature);
    }
    if stp.cycle_id != ctx.cycle_id {
        return Err(StpRejection::CycleMismatch {
            expected: ctx.cycle_id,
            found: stp.cycle_id,
        });
    }
    if !ctx.anchors.contains(&stp.anchor_block_hash) {
        return Err(StpRejection::AnchorInvalid);
    }
    if stp.reward != ctx.reward {
        return Err(StpRejection::RewardMismatch {
            expected: ctx.reward,
            found: stp.reward,
        });
    }
    if stp.membership_root != ctx.membership_root {
        return Err(StpRejection::RootMismatch);
    }
    if !local.keys().eq(stp.entries.keys()) {
        return Err(StpRejection::EntrySetMismatch);
    }
    let d = delta.hundredths() as i128;
    for ((address, &l), &p) in local.iter().zip(stp.entries.values()) {
        let diff = (p as i128 - l as i128).abs();
        if diff * 10_000 > d * (l as i128).abs() + 10_000 {
            return Err(StpRejection::EntryOutOfTolerance {
                address: *address,
                proposed: p,
                local: l,
            });
        }
    }
    Ok(())
}

/// A member's signed acceptance of a proposal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Confirmation {
    pub stp_hash: Hash32,
    pub confirmer: Address,
    pub signature: [u8; ECDSA_SIGNATURE_LEN],
}

impl Confirmation {
    fn message(stp_hash: &Hash32, confirmer: &Address) -> Vec<u8> {
        [CONFIRM_TAG, stp_hash, &confirmer.0].concat()
    }

    pub fn sign(key: &KeyPair, stp_hash: Hash32) -> Self {
        let confirmer = Address::from_public_key(key.public());
        let signature = ecdsa_sign(key, &Self::message(&stp_hash, &confirmer));
        Confirmation {
            stp_hash,
            confirmer,
            signature,
        }
    }

    pub fn verify(&self, key: &PublicKey) -> bool {
        Address::from_public_key(key) == self.confirmer
            && ecdsa_verify(
                key,
                &Self::message(&self.stp_hash, &self.confirmer),
                &self.signature,
            )
    }

    pub fn to_bytes(&self) -> [u8; CONFIRMATION_LEN] {
        let mut out = [0u8; CONFIRMATION_LEN];
        out[..32].copy_from_slice(&self.stp_hash);
        out[32..52].copy_from_slice(&self.confirmer.0);
        out[52..].copy_from_slice(&self.signature);
        out
    }
}

/// Proposer's broadcast that enough confirmations were collected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Announcement {
    pub stp_hash: Hash32,
    pub confirmers: Vec<Address>,
    pub signature: [u8; ECDSA_SIGNATURE_LEN],
}

impl Announcement {
    fn message(stp_hash: &Hash32, confirmers: &[Address]) -> Vec<u8> {
        let mut m = [ANNOUNCE_TAG, stp_hash.as_slice()].concat();
        for c in confirmers {
            m.extend_from_slice(&c.0);
        }
        m
    }

    pub fn sign(proposer: &KeyPair, stp_hash: Hash32, mut confirmers: Vec<Address>) -> Self {
        confirmers.sort();
        confirmers.dedup();
        let signature = ecdsa_sign(proposer, &Self::message(&stp_hash, &confirmers));
        Announcement {
            stp_hash,
            confirmers,
            signature,
        }
    }

    pub fn verify(&self, proposer: &PublicKey) -> bool {
        ecdsa_verify(
            proposer,
            &Self::message(&self.stp_hash, &self.confirmers),
            &self.signature,
        )
    }

    pub fn encoded_len(&self) -> usize {
        announcement_len(self.confirmers.len())
    }
}

/// True once `agreeing` members (the proposer included) reach the threshold.
pub fn threshold_met(agreeing: usize, total: usize, zeta: Percent) -> bool {
    agreeing >= zeta.min_count_of(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn keys(n: usize) -> Vec<KeyPair> {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        (0..n).map(|_| KeyPair::generate(&mut rng)).collect()
    }

    fn sample(k: &[KeyPair]) -> (Stp, BTreeMap<Address, i64>, StpContext) {
        let entries: BTreeMap<_, _> = k
            .iter()
            .enumerate()
            .map(|(i, kp)| {
                (
                    Address::from_public_key(kp.public()),
                    (i as i64 - 1) * 1_000_000,
                )
            })
            .collect();
        let stp = build_stp(&k[0], 4, [7; 32], [9; 32], 500, entries.clone(), 1234, 99);
        let ctx = StpContext {
            cycle_id: 4,
            reward: 500,
            proposer_key: *k[0].public(),
            anchors: [[7; 32]].into_iter().collect(),
            membership_root: [9; 32],
        };
        (stp, entries, ctx)
    }

    #[test]
    fn encoding_round_trips_and_has_expected_length() {
        let k = keys(3);
        let (stp, _, _) = sample(&k);
        let bytes = stp.to_bytes();
        assert_eq!(bytes.len(), stp_len(3));
        assert_eq!(stp_len(3), 173 + 84);
        assert_eq!(Stp::from_bytes(&bytes).unwrap(), stp);
        assert_eq!(
            Stp::from_bytes(&bytes[..bytes.len() - 1]),
            Err(SettlementError::Malformed)
        );
    }

    #[test]
    fn validation_accepts_honest_and_rejects_tampering() {
        let k = keys(3);
        let (stp, local, ctx) = sample(&k);
        let d = Percent::from_whole(1);
        assert_eq!(validate_stp(&local, &stp, d, &ctx), Ok(()));

        let mut bad = stp.clone();
        bad.reward += 1;
        assert_eq!(
            validate_stp(&local, &bad, d, &ctx),
            Err(StpRejection::BadSignature)
        );

        let inflate = |delta: i64| {
            let mut e = local.clone();
            *e.values_mut().find(|v| **v == 1_000_000).unwrap() += delta;
            build_stp(&k[0], 4, [7; 32], [9; 32], 500, e, 1234, 99)
        };
        // 1% of 1_000_000 is 10_000 plus one subunit
        assert!(validate_stp(&local, &inflate(10_001), d, &ctx).is_ok());
        assert!(matches!(
            validate_stp(&local, &inflate(10_002), d, &ctx),
            Err(StpRejection::EntryOutOfTolerance { .. })
        ));

        let other = build_stp(&k[0], 5, [7; 32], [9; 32], 500, local.clone(), 1, 1);
        assert!(matches!(
            validate_stp(&local, &other, d, &ctx),
            Err(StpRejection::CycleMismatch { .. })
        ));
        let other = build_stp(&k[0], 4, [8; 32], [9; 32], 500, local.clone(), 1, 1);
        assert_eq!(
            validate_stp(&local, &other, d, &ctx),
            Err(StpRejection::AnchorInvalid)
        );
        let other = build_stp(&k[0], 4, [7; 32], [1; 32], 500, local.clone(), 1, 1);
        assert_eq!(
            validate_stp(&local, &other, d, &ctx),
            Err(StpRejection::RootMismatch)
        );
        let mut fewer = local.clone();
        fewer.pop_first();
        let other = build_stp(&k[0], 4, [7; 32], [9; 32], 500, fewer, 1, 1);
        assert_eq!(
            validate_stp(&local, &other, d, &ctx),
            Err(StpRejection::EntrySetMismatch)
        );
        let other = build_stp(&k[1], 4, [7; 32], [9; 32], 500, local.clone(), 1, 1);
        assert_eq!(
            validate_stp(&local, &other, d, &ctx),
            Err(StpRejection::BadSignature)
        );
    }

    #[test]
    fn confirmations_and_announcements() {
        let k = keys(2);
        let c = Confirmation::sign(&k[1], [3; 32]);
        assert!(c.verify(k[1].public()));
        assert!(!c.verify(k[0].public()));
        assert_eq!(c.to_bytes().len(), 116);
        let a = Announcement::sign(&k[0], [3; 32], vec![c.confirmer, c.confirmer]);
        assert_eq!(a.confirmers.len(), 1);
        assert!(a.verify(k[0].public()));
        assert_eq!(a.encoded_len(), 32 + 4 + 20 + 64);
    }

    #[test]
    fn threshold_counts() {
        let z = Percent::from_whole(75);
        assert!(!threshold_met(5, 8, z));
        assert!(threshold_met(6, 8, z));
        assert!(threshold_met(3, 3, Percent::from_hundredths(8750)));
        assert!(!threshold_met(2, 3, Percent::from_hundredths(8750)));
    }
}
