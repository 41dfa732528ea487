//! `pecs import`: validate a time-tagged stream and summarize it,
//! optionally converting to canonical TTAG1.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args as ClapArgs;
use pecs_core::timetag::{self, TotalTimeSource};
use serde::{Deserialize, Serialize};

#[derive(ClapArgs)]
pub struct Args {
    /// Re-run from an echoed config (replaces all other flags).
    #[arg(long, exclusive = true)]
    config: Option<PathBuf>,
    /// Input stream file.
    #[arg(long = "in", required_unless_present = "config")]
    input: Option<PathBuf>,
    /// Input format.
    #[arg(long, value_parser = ["ttag1", "csv"], required_unless_present = "config")]
    format: Option<String>,
    /// Tick resolution in seconds (required for CSV input).
    #[arg(long)]
    resolution: Option<f64>,
    /// Optional canonical TTAG1 output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, default_value = "import")]
    prefix: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    input: PathBuf,
    format: String,
    resolution: Option<f64>,
    out: Option<PathBuf>,
    out_dir: PathBuf,
    prefix: String,
}

#[derive(Serialize)]
struct Report {
    counts_a: usize,
    counts_b: usize,
    total_time_s: f64,
    total_time_source: String,
    max_timestamp_s: f64,
    tick_resolution_s: f64,
    rate_a_cps: f64,
    rate_b_cps: f64,
    warnings: Vec<String>,
}

pub fn run(args: Args) -> Result<()> {
    let config = super::load_or_build(&args.config, || {
        Ok(Config {
            input: super::resolve_input(args.input.as_ref().unwrap())?,
            format: args.format.clone().unwrap(),
            resolution: args.resolution,
            out: args.out.clone(),
            out_dir: super::resolve_out_dir(&args.out_dir)?,
            prefix: args.prefix.clone(),
        })
    })?;
    super::echo_config(&config.out_dir, &config.prefix, &config)?;

    let imported = match config.format.as_str() {
        "ttag1" => timetag::import_binary(&config.input)?,
        "csv" => {
            let resolution = config
                .resolution
                .context("CSV import needs --resolution <seconds per tick>")?;
            timetag::import_csv(&config.input, resolution)?
        }
        other => anyhow::bail!("unknown format `{other}`"),
    };

    if let Some(out) = &config.out {
        timetag::export_binary(&imported.record, out)?;
    }

    let record = &imported.record;
    let report = Report {
        counts_a: record.counts_a(),
        counts_b: record.counts_b(),
        total_time_s: record.total_time(),
        total_time_source: match record.total_time_source() {
            TotalTimeSource::Header => "header".into(),
            TotalTimeSource::MaxTimestamp => "max-timestamp".into(),
        },
        max_timestamp_s: record.max_timestamp_time_s(),
        tick_resolution_s: record.tick_resolution(),
        rate_a_cps: record.rate_a(),
        rate_b_cps: record.rate_b(),
        warnings: imported.warnings.iter().map(|w| w.to_string()).collect(),
    };
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    super::write_report(&config.out_dir, &config.prefix, &report)?;
    println!(
        "imported {} + {} events over {:.6} s",
        report.counts_a, report.counts_b, report.total_time_s
    );
    Ok(())
}
