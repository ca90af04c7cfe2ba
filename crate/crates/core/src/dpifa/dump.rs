use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    aggregate, audit, AuditReport, CycleStore, DpifaReport, KeyDirectory, Rejection, ReportKey,
};
use crate::musig::PublicKey;
use crate::RouterId;

/// One line of a report dump.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DumpRecord {
    Key {
        router: RouterId,
        pubkey: PublicKey,
    },
    /// Hex of the full wire encoding.
    Report {
        wire: String,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum DumpError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub fn write_dump<'a, W: Write>(
    keys: &BTreeMap<RouterId, PublicKey>,
    reports: impl IntoIterator<Item = &'a DpifaReport>,
    mut out: W,
) -> std::io::Result<()> {
    for (&router, &pubkey) in keys {
        serde_json::to_writer(&mut out, &DumpRecord::Key { router, pubkey })?;
        out.write_all(b"\n")?;
    }
    for r in reports {
        let wire = r.to_wire().map_err(std::io::Error::other)?;
        serde_json::to_writer(
            &mut out,
            &DumpRecord::Report {
                wire: hex::encode(wire),
            },
        )?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_dump<R: BufRead>(input: R) -> Result<(KeyDirectory, Vec<DpifaReport>), DumpError> {
    let mut keys = BTreeMap::new();
    let mut reports = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| DumpError::Parse {
            line: i + 1,
            message,
        };
        match serde_json::from_str(&line).map_err(|e| err(e.to_string()))? {
            DumpRecord::Key { router, pubkey } => {
                if keys.insert(router, pubkey).is_some_and(|old| old != pubkey) {
                    return Err(err(format!("conflicting keys for {router}")));
                }
            }
            DumpRecord::Report { wire } => {
                let bytes = hex::decode(wire).map_err(|e| err(e.to_string()))?;
                reports.push(DpifaReport::from_wire(&bytes).map_err(|e| err(e.to_string()))?);
            }
        }
    }
    Ok((keys.into_iter().collect(), reports))
}

/// Audit of a dump, cycle by cycle.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DumpValidation {
    pub accepted: usize,
    pub rejected: Vec<(ReportKey, Rejection)>,
    pub missing: BTreeSet<ReportKey>,
    pub audits: BTreeMap<u32, AuditReport>,
}

impl DumpValidation {
    pub fn is_clean(&self) -> bool {
        self.rejected.is_empty()
            && self.missing.is_empty()
            && self.audits.values().all(AuditReport::is_clean)
    }

    pub fn count(&self, criterion: &str) -> usize {
        self.audits.values().map(|a| a.count(criterion)).sum()
    }
}

/// Ingests every report into per-cycle stores and runs the criteria. Every
/// link seen in a cycle must be reported from both sides for every sequence
/// number present in that cycle.
pub fn validate_dump(keys: &KeyDirectory, reports: Vec<DpifaReport>) -> DumpValidation {
    let mut by_cycle: BTreeMap<u32, Vec<DpifaReport>> = BTreeMap::new();
    for r in reports {
        by_cycle.entry(r.body.cycle).or_default().push(r);
    }
    let mut out = DumpValidation::default();
    for (cycle, reports) in by_cycle {
        let lo = reports.iter().map(|r| r.body.seq).min().unwrap();
        let hi = reports.iter().map(|r| r.body.seq).max().unwrap();
        let expected: BTreeSet<_> = reports
            .iter()
            .flat_map(|r| [(r.body.rid, r.body.nid), (r.body.nid, r.body.rid)])
            .collect();
        let mut store = CycleStore::new(cycle, lo..=hi, 0..=u32::MAX);
        for r in reports {
            let key = (r.body.rid, r.body.nid, r.body.seq);
            match store.ingest(Arc::new(r), keys) {
                Ok(()) => out.accepted += 1,
                Err(e) => out.rejected.push((key, e)),
            }
        }
        let agg = aggregate(&store, &expected);
        out.missing.extend(agg.missing.iter().copied());
        out.audits.insert(cycle, audit(&agg));
    }
    out
}
