//! `pecs correlate`: normalized cross-correlation of a TTAG1 stream,
//! optionally split into intensity-thresholded blinking partitions.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args as ClapArgs;
use pecs_core::correlator::{cross_correlate, PartitionSpec, TauAxis, TauScale};
use pecs_core::timetag;
use serde::{Deserialize, Serialize};

use crate::util;

#[derive(ClapArgs)]
pub struct Args {
    /// Re-run from an echoed config (replaces all other flags).
    #[arg(long, exclusive = true)]
    config: Option<PathBuf>,
    /// Input TTAG1 stream.
    #[arg(long = "in", required_unless_present = "config")]
    input: Option<PathBuf>,
    /// Delay-axis lower edge, seconds.
    #[arg(long, allow_hyphen_values = true, required_unless_present = "config")]
    tau_min: Option<f64>,
    /// Delay-axis upper edge, seconds.
    #[arg(long, required_unless_present = "config")]
    tau_max: Option<f64>,
    /// Delay resolution (smallest bin width), seconds.
    #[arg(long, required_unless_present = "config")]
    tau_res: Option<f64>,
    /// Axis scale.
    #[arg(long, value_parser = ["lin", "log"], default_value = "lin")]
    scale: String,
    /// Count-rate ranges `low:high[,low:high...]` (counts/s, `inf` allowed)
    /// that partition the acquisition by summed-channel intensity.
    #[arg(long)]
    partition_ranges: Option<String>,
    /// Intensity-trace bin width for partitioning, seconds.
    #[arg(long, default_value_t = 0.01)]
    t_res: f64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, default_value = "correlate")]
    prefix: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    input: PathBuf,
    tau_min: f64,
    tau_max: f64,
    tau_res: f64,
    scale: String,
    partition_ranges: Option<String>,
    t_res: f64,
    out_dir: PathBuf,
    prefix: String,
}

#[derive(Serialize)]
struct Meta {
    rate_a_cps: f64,
    rate_b_cps: f64,
    acquisition_time_s: f64,
    bins: usize,
    partition_duration_s: Option<f64>,
    warnings: Vec<String>,
}

pub fn run(args: Args) -> Result<()> {
    let config = super::load_or_build(&args.config, || {
        Ok(Config {
            input: super::resolve_input(args.input.as_ref().unwrap())?,
            tau_min: args.tau_min.unwrap(),
            tau_max: args.tau_max.unwrap(),
            tau_res: args.tau_res.unwrap(),
            scale: args.scale.clone(),
            partition_ranges: args.partition_ranges.clone(),
            t_res: args.t_res,
            out_dir: super::resolve_out_dir(&args.out_dir)?,
            prefix: args.prefix.clone(),
        })
    })?;
    super::echo_config(&config.out_dir, &config.prefix, &config)?;

    let record = timetag::import_binary(&config.input)?.record;
    let scale = match config.scale.as_str() {
        "log" => TauScale::Logarithmic,
        _ => TauScale::Linear,
    };
    let axis = TauAxis::build((config.tau_min, config.tau_max), config.tau_res, scale)?;

    let partitions = match &config.partition_ranges {
        Some(text) => {
            let ranges = util::parse_rate_ranges(text)?;
            let spec = PartitionSpec::RateRanges {
                ranges,
                t_res: config.t_res,
            };
            spec.resolve(&record)?.into_iter().map(Some).collect()
        }
        None => vec![None],
    };

    for (index, partition) in partitions.iter().enumerate() {
        let suffix = if partitions.len() == 1 && partition.is_none() {
            String::new()
        } else {
            format!("_p{index}")
        };
        let result = cross_correlate(&record, &axis, partition.as_ref())?;
        let csv_path = config
            .out_dir
            .join(format!("{}{suffix}.csv", config.prefix));
        util::write_g2_csv(&csv_path, &result)?;

        let meta = Meta {
            rate_a_cps: result.rate_a(),
            rate_b_cps: result.rate_b(),
            acquisition_time_s: result.acquisition_time(),
            bins: result.axis().n_bins(),
            partition_duration_s: partition.as_ref().map(|p| p.duration()),
            warnings: result.warnings().iter().map(|w| format!("{w:?}")).collect(),
        };
        for warning in &meta.warnings {
            eprintln!("warning: {warning}");
        }
        let meta_path = config
            .out_dir
            .join(format!("{}{suffix}_meta.json", config.prefix));
        std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)? + "\n")?;
        println!("wrote {}", csv_path.display());
    }
    Ok(())
}
