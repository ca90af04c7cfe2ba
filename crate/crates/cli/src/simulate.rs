use std::fs;
use std::io::BufWriter;
use std::path::Path;

use anyhow::Context;
use harpia_core::netsim::{SimConfig, Simulation, Summary};

use crate::{Failure, Format};

pub fn run(scenario: &Path, out: &Path, seed: Option<u64>, format: Format) -> Result<(), Failure> {
    let text =
        fs::read_to_string(scenario).with_context(|| format!("reading {}", scenario.display()))?;
    let mut cfg =
        SimConfig::from_toml(&text).with_context(|| format!("loading {}", scenario.display()))?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    log::info!(
        "simulating {} cycles over {} routers",
        cfg.cycles,
        cfg.router_specs().len()
    );
    let mut sim = Simulation::new(cfg)?.keep_reports(true);
    sim.run()?;

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let metrics = sim.metrics();
    let summary = metrics.summary();
    fs::write(out.join("metrics.csv"), metrics.to_csv())?;
    fs::write(
        out.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    let dump = fs::File::create(out.join("reports.ndjson"))?;
    sim.write_report_dump(BufWriter::new(dump))?;

    match format {
        Format::Text => print!("{}", render(&summary)),
        Format::Json => println!("{}", serde_json::to_string_pretty(&summary)?),
        Format::Csv => print!("{}", metrics.to_csv()),
    }
    Ok(())
}

fn render(s: &Summary) -> String {
    let mut out = format!("cycles        {}\nsettles       {}\n", s.cycles, s.settles);
    out += &format!(
        "rejected      {} settle, {} proposal\n",
        s.settle_rejections, s.stp_rejections
    );
    let violations: Vec<String> = s
        .violations
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    out += &format!(
        "violations    {}\n",
        if violations.is_empty() {
            "none".into()
        } else {
            violations.join(" ")
        }
    );
    let evicted: Vec<String> = s.evictions.iter().map(|r| r.to_string()).collect();
    out += &format!(
        "evicted       {}\n",
        if evicted.is_empty() {
            "none".into()
        } else {
            evicted.join(" ")
        }
    );
    out += &format!("message bytes {}\n", s.message_bytes);
    for (class, bytes) in &s.bytes {
        out += &format!("  {:<14} {bytes}\n", format!("{class:?}"));
    }
    out += &format!("delivery      {:.4}\n", s.mean_delivery_ratio);
    out += "router  tokens          ether\n";
    for (r, tokens) in &s.final_tokens {
        let wei = s.final_ether_value_wei.get(r).copied().unwrap_or(0);
        out += &format!(
            "{:<7} {:<15} {}\n",
            r.to_string(),
            harpia_core::units::format_decimal(*tokens, 9),
            harpia_core::units::format_decimal(wei, 18)
        );
    }
    out
}
