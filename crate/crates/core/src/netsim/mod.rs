//! Deterministic discrete-event simulation of routers exchanging traffic,
//! accounting reports, settlement proposals and multi-signatures against the
//! emulated ledger.

mod bus;
mod config;
mod engine;
mod metrics;
mod trees;

pub use bus::{
    dispatch, ByteCounts, MessageClass, ReportBus, MUSIG_BYTES_PER_SIGNER, RECOVERY_REQUEST_LEN,
};
pub use config::{
    Behavior, CounterField, FlowSpec, Generator, LinkSpec, RouterSpec, SimConfig, TopUp,
};
pub use engine::{run, Simulation};
pub use metrics::{CycleMetrics, Event, FlowDelivery, Metrics, RouterRow, Summary};
pub use trees::TreeCache;

use crate::dpifa::ReportError;
use crate::ledger::LedgerError;
use crate::musig::MuSigError;

#[derive(Debug, thiserror::Error)]
pub enum NetsimError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("topology is not connected")]
    Disconnected,
    #[error("no router is configured to propose")]
    NoProposer,
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    MuSig(#[from] MuSigError),
    #[error(transparent)]
    Report(#[from] ReportError),
}
