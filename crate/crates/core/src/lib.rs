//! Protocol engine for credit-based packet-forwarding incentives in community
//! networks.
//!
//! Routers account traffic per neighbor link and exchange signed reports
//! ([`dpifa`]). Each cycle any router may turn the audited reports into a
//! settlement proposal ([`settlement`]). Once enough members co-sign it with an
//! m-of-n Schnorr multi-signature ([`musig`]), the proposal is applied to an
//! emulated token contract ([`ledger`]). [`netsim`] drives the whole loop over a
//! simulated network, and [`costmodel`] evaluates the storage and traffic
//! formulas.

pub mod costmodel;
pub mod dpifa;
mod hexser;
pub mod identity;
pub mod ledger;
pub mod musig;
pub mod netsim;
pub mod percent;
pub mod settlement;
pub mod topology;
pub mod units;

pub use identity::{Address, RouterId};
pub use percent::Percent;

/// 32-byte SHA-256 digest.
pub type Hash32 = [u8; 32];

/// One token expressed in subunits.
pub const SUBUNITS_PER_TOKEN: u64 = 1_000_000_000;
/// One ether expressed in wei.
pub const WEI_PER_ETHER: u128 = 1_000_000_000_000_000_000;
/// Bytes per gigabyte used by link prices.
pub const BYTES_PER_GB: u64 = 1_000_000_000;
