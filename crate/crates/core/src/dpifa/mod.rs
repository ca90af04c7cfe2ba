//! Distributed per-link traffic accounting.
//!
//! Every router counts input/output/started/terminated/origin-from-neighbor
//! traffic per neighbor link, emits one signed report per link and period, and
//! audits the reports of every other router with three credibility criteria:
//! link symmetry, flow conservation, and the origin cross-check.

mod audit;
mod counters;
mod dump;
mod report;
mod store;

pub use audit::{
    audit, check_conservation, check_ofn, check_symmetry, conservation_violations, infer_topology,
    AuditReport, Violation,
};
pub use counters::{account, Counter, Direction, LinkCounters, PacketEvent, RouterAccounting};
pub use dump::{read_dump, validate_dump, write_dump, DumpError, DumpRecord, DumpValidation};
pub use report::{
    DpifaReport, ReportBody, ReportError, REPORT_EXTENSION_LEN, REPORT_HEADER_LEN,
    REPORT_MESSAGE_LEN, REPORT_VERSION, REPORT_WIRE_LEN,
};
pub use store::{
    aggregate, AggregatedCounters, CycleStore, KeyDirectory, Rejection, ReportKey, ReportVerifier,
};
