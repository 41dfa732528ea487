//! `pecs waiting`: waiting-time distributions W(τ).

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args as ClapArgs;
use pecs_core::conv::UniformGrid;
use pecs_core::waiting_time::{waiting_three_level, waiting_two_level, ThreeLevelRates};
use serde::{Deserialize, Serialize};

use crate::util;

#[derive(ClapArgs)]
pub struct Args {
    /// Re-run from an echoed config (replaces all other flags).
    #[arg(long, exclusive = true)]
    config: Option<PathBuf>,
    /// Model form.
    #[arg(long, value_parser = ["two-level", "three-level"], required_unless_present = "config")]
    model: Option<String>,
    /// Transition rates in MHz: `ge,eg` for two-level,
    /// `ge,eg,em,mg` for three-level.
    #[arg(long, required_unless_present = "config")]
    rates: Option<String>,
    /// Collection efficiency in (0, 1] (two-level only).
    #[arg(long, default_value_t = 1.0)]
    ceff: f64,
    /// Grid extent in seconds.
    #[arg(long, required_unless_present = "config")]
    t_max: Option<f64>,
    /// Grid step in seconds (default: extent/20000).
    #[arg(long)]
    step: Option<f64>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, default_value = "waiting")]
    prefix: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    model: String,
    rates: String,
    ceff: f64,
    t_max: f64,
    step: Option<f64>,
    out_dir: PathBuf,
    prefix: String,
}

pub fn run(args: Args) -> Result<()> {
    let config = super::load_or_build(&args.config, || {
        Ok(Config {
            model: args.model.clone().unwrap(),
            rates: args.rates.clone().unwrap(),
            ceff: args.ceff,
            t_max: args.t_max.unwrap(),
            step: args.step,
            out_dir: super::resolve_out_dir(&args.out_dir)?,
            prefix: args.prefix.clone(),
        })
    })?;
    super::echo_config(&config.out_dir, &config.prefix, &config)?;

    let rates: Vec<f64> = config
        .rates
        .split(',')
        .map(|s| s.trim().parse::<f64>().map(|r| r * 1e6))
        .collect::<Result<_, _>>()
        .map_err(|e| anyhow::anyhow!("bad --rates `{}`: {e}", config.rates))?;
    let step = config.step.unwrap_or(config.t_max / 20_000.0);
    let grid = UniformGrid::with_extent(step, config.t_max);

    let curve = match config.model.as_str() {
        "two-level" => {
            if rates.len() != 2 {
                bail!("two-level needs --rates ge,eg (MHz)");
            }
            waiting_two_level(rates[0], rates[1], config.ceff, grid)?
        }
        "three-level" => {
            if rates.len() != 4 {
                bail!("three-level needs --rates ge,eg,em,mg (MHz)");
            }
            waiting_three_level(
                ThreeLevelRates {
                    gamma_ge: rates[0],
                    gamma_eg: rates[1],
                    gamma_em: rates[2],
                    gamma_mg: rates[3],
                },
                grid,
            )?
        }
        other => bail!("unknown waiting-time model `{other}`"),
    };

    let csv_path = config.out_dir.join(format!("{}.csv", config.prefix));
    let rows: Vec<(f64, f64)> = curve
        .times()
        .into_iter()
        .zip(curve.values().iter().copied())
        .collect();
    util::write_xy_csv(&csv_path, "tau_s,W_per_s", &rows)?;

    super::write_report(
        &config.out_dir,
        &config.prefix,
        &serde_json::json!({
            "mass": curve.mass(),
            "mean_interval_s": curve.mean_interval(),
            "collection": curve.collection(),
            "points": curve.values().len(),
        }),
    )?;
    println!("wrote {} (mass {:.6})", csv_path.display(), curve.mass());
    Ok(())
}
