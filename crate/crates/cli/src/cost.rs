use anyhow::{anyhow, Context};
use harpia_core::costmodel::{
    combo_count, cycle_traffic_bytes, dpifa_storage_bytes, format_mib, musig_storage_bytes,
    musig_storage_bytes_as_built, CostInputs,
};
use harpia_core::units::parse_decimal;
use harpia_core::Percent;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde_json::json;

use crate::{Failure, Format};

const NU_DECIMALS: u32 = 6;

fn parse_nu(s: &str) -> anyhow::Result<BigRational> {
    let scaled = parse_decimal(s, NU_DECIMALS).with_context(|| format!("bad --nu {s:?}"))?;
    Ok(BigRational::new(
        scaled.into(),
        10u128.pow(NU_DECIMALS).into(),
    ))
}

fn mib(bytes: &num_bigint::BigUint) -> String {
    bytes
        .to_u128()
        .map(format_mib)
        .unwrap_or_else(|| "-".into())
}

pub fn run(
    n: usize,
    zeta: Percent,
    nu: &str,
    lambda: u64,
    cycle: u64,
    proposers: usize,
    format: Format,
) -> Result<(), Failure> {
    let inputs = CostInputs {
        n,
        zeta,
        nu: parse_nu(nu)?,
        lambda,
        cycle_seconds: cycle,
    };
    inputs.validate()?;
    if proposers == 0 || proposers > n {
        return Err(anyhow!("--proposers must be between 1 and {n}").into());
    }
    let combos = combo_count(n, zeta)?;
    let musig = musig_storage_bytes(n, zeta)?;
    let built = musig_storage_bytes_as_built(n, zeta)?;
    let dpifa = dpifa_storage_bytes(&inputs);
    let traffic = cycle_traffic_bytes(&inputs, proposers);
    let m = zeta.min_count_of(n);

    match format {
        Format::Json => {
            let doc = json!({
                "n": n,
                "zeta": zeta.to_string(),
                "threshold": m,
                "nu": nu,
                "lambda": lambda,
                "cycle_seconds": cycle,
                "periods": inputs.periods(),
                "combinations": combos.to_string(),
                "musig_storage_bytes": musig.to_string(),
                "musig_storage_bytes_as_built": built.to_string(),
                "dpifa_storage_bytes": dpifa,
                "cycle_traffic": {
                    "dpifa": traffic.dpifa,
                    "stp": traffic.stp,
                    "confirmation": traffic.confirmation,
                    "musig": traffic.musig,
                    "total": traffic.total(),
                },
            });
            println!("{}", serde_json::to_string_pretty(&doc)?);
        }
        Format::Csv => {
            println!("metric,bytes");
            println!("combinations,{combos}");
            println!("musig_storage,{musig}");
            println!("musig_storage_as_built,{built}");
            println!("dpifa_storage,{dpifa}");
            println!("cycle_traffic_dpifa,{}", traffic.dpifa);
            println!("cycle_traffic_stp,{}", traffic.stp);
            println!("cycle_traffic_confirmation,{}", traffic.confirmation);
            println!("cycle_traffic_musig,{}", traffic.musig);
            println!("cycle_traffic_total,{}", traffic.total());
        }
        Format::Text => {
            println!("routers                  {n}");
            println!("threshold                {m}-of-{n} ({zeta}%)");
            println!("periods per cycle        {}", inputs.periods());
            println!("key combinations         {combos}");
            println!("musig storage            {musig} B ({})", mib(&musig));
            println!("musig storage, as built  {built} B ({})", mib(&built));
            println!("dpifa storage            {dpifa} B ({})", format_mib(dpifa));
            println!(
                "cycle traffic            {} B ({})",
                traffic.total(),
                format_mib(traffic.total())
            );
            println!("  reports                {} B", traffic.dpifa);
            println!("  proposals              {} B", traffic.stp);
            println!("  confirmations          {} B", traffic.confirmation);
            println!("  multi-signature        {} B", traffic.musig);
        }
    }
    Ok(())
}
