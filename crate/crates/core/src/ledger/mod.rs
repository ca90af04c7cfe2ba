//! Emulated token contract: parameters, membership, token and ether
//! bookkeeping, and multi-signature gated Join, Leave and Settle.

mod clock;
mod contract;
mod log;
mod params;

pub use clock::ChainClock;
pub use contract::{
    join_payload, leave_payload, Authorization, EtherFlows, Ledger, LedgerState, Member, PendingOp,
    SettleOutcome,
};
pub use log::{read_log, write_log, LedgerOp};
pub use params::ContractParams;

use crate::musig::MuSigError;
use crate::{Address, Percent};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LedgerError {
    #[error("invalid parameters: {0}")]
    InvalidParams(&'static str),
    #[error("deposit {deposit} wei is below the minimum {minimum}")]
    DepositBelowMinimum { deposit: u128, minimum: u128 },
    #[error("{0:?} is already a member")]
    DuplicateMember(Address),
    #[error("{0:?} is not a member")]
    UnknownMember(Address),
    #[error("a Join or Leave is already pending")]
    PendingOccupied,
    #[error("authorization rejected")]
    BadAuthorization,
    #[error("settle at height {height} is too early; last settle at {last}")]
    TooEarly { height: u64, last: u64 },
    #[error("anchor block is unknown")]
    UnknownAnchor,
    #[error("anchor block {anchor} is too old at height {height}")]
    AnchorExpired { anchor: u64, height: u64 },
    #[error("proposal for cycle {found}, ledger is at cycle {expected}")]
    CycleMismatch { expected: u32, found: u32 },
    #[error("entry set differs from member set")]
    EntrySetMismatch,
    #[error("proposer {0:?} is not a member")]
    ProposerNotMember(Address),
    #[error("reward {found} differs from configured {expected}")]
    RewardMismatch { expected: u64, found: u64 },
    #[error("membership root does not match")]
    RootMismatch,
    #[error("settlement would leave {0:?} with a negative balance")]
    InsolventMember(Address),
    #[error("insufficient token balance")]
    InsufficientTokens,
    #[error("ledger has no members")]
    NoMembers,
    #[error("arithmetic overflow")]
    Overflow,
    #[error("threshold {0} outside [50, 100)")]
    Threshold(Percent),
    #[error(transparent)]
    MuSig(#[from] MuSigError),
    #[error("operation log: {0}")]
    Log(String),
}
