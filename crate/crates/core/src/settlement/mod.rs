//! Settlement transaction proposals (STPs).
//!
//! Credit deltas are derived from audited accounting aggregates and link
//! prices, packed into a signed proposal, checked by every other member within
//! a tolerance, and confirmed with signed acknowledgements.

mod entries;
mod stp;

pub use entries::{
    avg_hop_count, avg_price, compute_entries, compute_entries_exact, forwarded_bytes, Exclusions,
    PriceView,
};
pub use stp::{
    announcement_len, build_stp, stp_len, threshold_met, validate_stp, Announcement, Confirmation,
    Stp, StpContext, StpRejection, CONFIRMATION_LEN,
};

use crate::RouterId;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SettlementError {
    #[error("link {0}-{1} carries traffic but has no symmetric price")]
    MissingPrice(RouterId, RouterId),
    #[error("router {0} has no registered address")]
    UnknownRouter(RouterId),
    #[error("entry for {0} does not fit in 64 bits")]
    EntryOverflow(RouterId),
    #[error("malformed STP encoding")]
    Malformed,
}
