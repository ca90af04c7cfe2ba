use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::Context;
use harpia_core::dpifa::{read_dump, validate_dump, Violation};
use serde_json::json;

use crate::{Failure, Format};

fn describe(v: &Violation) -> String {
    match v {
        Violation::Symmetry {
            sender,
            receiver,
            sent,
            received,
        } => format!(
            "{sender} -> {receiver}: sent {}/{} B, received {}/{} B",
            sent.packets, sent.bytes, received.packets, received.bytes
        ),
        Violation::Conservation {
            router,
            input,
            terminated,
            output,
            started,
        } => format!(
            "{router}: in {} B, terminated {} B, out {} B, started {} B",
            input.bytes, terminated.bytes, output.bytes, started.bytes
        ),
        Violation::Origin {
            sender,
            receiver,
            started,
            origin_seen,
        } => format!(
            "{sender} -> {receiver}: started {} B, neighbor saw {} B",
            started.bytes, origin_seen.bytes
        ),
    }
}

pub fn run(dump: &Path, format: Format) -> Result<(), Failure> {
    let file = File::open(dump).with_context(|| format!("opening {}", dump.display()))?;
    let (keys, reports) = read_dump(BufReader::new(file))?;
    let result = validate_dump(&keys, reports);
    let criteria = ["symmetry", "conservation", "origin"];

    match format {
        Format::Json => {
            let cycles: Vec<_> = result
                .audits
                .iter()
                .map(|(cycle, a)| json!({ "cycle": cycle, "violations": a.violations }))
                .collect();
            let rejected: Vec<_> = result
                .rejected
                .iter()
                .map(|(k, e)| json!({ "report": format!("{k:?}"), "reason": format!("{e:?}") }))
                .collect();
            let counts: serde_json::Map<_, _> = criteria
                .iter()
                .map(|c| (c.to_string(), json!(result.count(c))))
                .collect();
            let doc = json!({
                "accepted": result.accepted,
                "rejected": rejected,
                "missing": result.missing.len(),
                "violations": counts,
                "cycles": cycles,
            });
            println!("{}", serde_json::to_string_pretty(&doc)?);
        }
        Format::Text | Format::Csv => {
            println!(
                "reports accepted {}, rejected {}, missing {}",
                result.accepted,
                result.rejected.len(),
                result.missing.len()
            );
            for (key, why) in &result.rejected {
                println!("  rejected {key:?}: {why:?}");
            }
            for c in criteria {
                println!("{c}: {} violation(s)", result.count(c));
                for (cycle, a) in &result.audits {
                    for v in a.violations.iter().filter(|v| v.criterion() == c) {
                        println!("  cycle {cycle}: {}", describe(v));
                    }
                }
            }
        }
    }
    if result.is_clean() {
        Ok(())
    } else {
        Err(Failure::Invalid(format!(
            "{} violation(s), {} rejected report(s), {} missing",
            criteria.iter().map(|c| result.count(c)).sum::<usize>(),
            result.rejected.len(),
            result.missing.len()
        )))
    }
}
