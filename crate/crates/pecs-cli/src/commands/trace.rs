//! `pecs trace`: intensity vs time for stability checks and blinking
//! threshold selection.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args as ClapArgs;
use pecs_core::correlator::intensity_trace;
use pecs_core::timetag;
use serde::{Deserialize, Serialize};

#[derive(ClapArgs)]
pub struct Args {
    /// Re-run from an echoed config (replaces all other flags).
    #[arg(long, exclusive = true)]
    config: Option<PathBuf>,
    /// Input TTAG1 stream.
    #[arg(long = "in", required_unless_present = "config")]
    input: Option<PathBuf>,
    /// Count-rate bin width in seconds.
    #[arg(long, default_value_t = 0.01)]
    t_res: f64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, default_value = "trace")]
    prefix: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    input: PathBuf,
    t_res: f64,
    out_dir: PathBuf,
    prefix: String,
}

pub fn run(args: Args) -> Result<()> {
    let config = super::load_or_build(&args.config, || {
        Ok(Config {
            input: super::resolve_input(args.input.as_ref().unwrap())?,
            t_res: args.t_res,
            out_dir: super::resolve_out_dir(&args.out_dir)?,
            prefix: args.prefix.clone(),
        })
    })?;
    super::echo_config(&config.out_dir, &config.prefix, &config)?;

    let imported = timetag::import_binary(&config.input)?;
    let (trace, warnings) = intensity_trace(&imported.record, config.t_res)?;
    for warning in &warnings {
        eprintln!("warning: {warning:?}");
    }

    let path = config.out_dir.join(format!("{}.csv", config.prefix));
    let mut out = Vec::new();
    writeln!(out, "time_s,rate_a_cps,rate_b_cps,rate_sum_cps")?;
    let edges = trace.time_edges();
    for (k, (&ra, &rb)) in trace.rates_a().iter().zip(trace.rates_b()).enumerate() {
        let center = 0.5 * (edges[k] + edges[k + 1]);
        writeln!(out, "{center},{ra},{rb},{}", ra + rb)?;
    }
    fs::write(&path, out).with_context(|| format!("writing {}", path.display()))?;

    super::write_report(
        &config.out_dir,
        &config.prefix,
        &serde_json::json!({
            "bins": trace.n_bins(),
            "t_res_s": trace.t_res(),
            "warnings": warnings.iter().map(|w| format!("{w:?}")).collect::<Vec<_>>(),
        }),
    )?;
    println!("wrote {}", path.display());
    Ok(())
}
