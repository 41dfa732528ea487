//! `pecs correct`: remove uncorrelated background from a measured g²
//! curve using a signal fraction supplied directly or estimated from a
//! spatial line trace or a power-saturation series.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args as ClapArgs;
use pecs_core::corrections::{
    background_correct, fit_line_trace, fit_saturation, IrfHistogram, RhoEstimate, RhoMethod,
};
use pecs_core::correlator::CorrelationResult;
use serde::{Deserialize, Serialize};

use crate::util;

#[derive(ClapArgs)]
pub struct Args {
    /// Re-run from an echoed config (replaces all other flags).
    #[arg(long, exclusive = true)]
    config: Option<PathBuf>,
    /// Measured g2 curve CSV (from `pecs correlate`).
    #[arg(long, required_unless_present = "config")]
    g2: Option<PathBuf>,
    /// Signal fraction: a number in (0,1], or `auto` to estimate it from
    /// `--line-trace` or `--saturation`.
    #[arg(long, required_unless_present = "config")]
    rho: Option<String>,
    /// `position,intensity` profile across the emitter.
    #[arg(long)]
    line_trace: Option<PathBuf>,
    /// `power,intensity` saturation series.
    #[arg(long)]
    saturation: Option<PathBuf>,
    /// Excitation power at which the g2 data were taken (pairs with
    /// `--saturation`).
    #[arg(long)]
    at_power: Option<f64>,
    /// Measured IRF histogram `time_s,weight`; re-binned to the g2 grid
    /// and written alongside for use in `pecs fit --irf`.
    #[arg(long)]
    irf: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, default_value = "correct")]
    prefix: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    g2: PathBuf,
    rho: String,
    line_trace: Option<PathBuf>,
    saturation: Option<PathBuf>,
    at_power: Option<f64>,
    irf: Option<PathBuf>,
    out_dir: PathBuf,
    prefix: String,
}

pub fn run(args: Args) -> Result<()> {
    let config = super::load_or_build(&args.config, || {
        Ok(Config {
            g2: super::resolve_input(args.g2.as_ref().unwrap())?,
            rho: args.rho.clone().unwrap(),
            line_trace: args
                .line_trace
                .as_deref()
                .map(super::resolve_input)
                .transpose()?,
            saturation: args
                .saturation
                .as_deref()
                .map(super::resolve_input)
                .transpose()?,
            at_power: args.at_power,
            irf: args.irf.as_deref().map(super::resolve_input).transpose()?,
            out_dir: super::resolve_out_dir(&args.out_dir)?,
            prefix: args.prefix.clone(),
        })
    })?;
    super::echo_config(&config.out_dir, &config.prefix, &config)?;

    let curve = util::read_g2_csv(&config.g2)?;
    let axis = util::axis_from_centers(&curve.tau)?;
    let measured = CorrelationResult::from_parts(
        axis,
        curve.raw_counts.clone(),
        curve.g2.clone(),
        curve.err_plus.clone(),
        curve.err_minus.clone(),
        0.0,
        0.0,
        0.0,
    )?;

    let mut fit_warnings: Vec<String> = Vec::new();
    let rho = match config.rho.as_str() {
        "auto" => match (&config.line_trace, &config.saturation) {
            (Some(path), None) => {
                let samples = util::read_xy_csv(path)?;
                let (rho, warnings) = fit_line_trace(&samples)?;
                fit_warnings.extend(warnings.iter().map(|w| format!("{w:?}")));
                rho
            }
            (None, Some(path)) => {
                let power = config
                    .at_power
                    .context("--saturation needs --at-power <p> for the rho evaluation")?;
                let samples = util::read_xy_csv(path)?;
                let fit = fit_saturation(&samples)?;
                fit_warnings.extend(fit.warnings.iter().map(|w| format!("{w:?}")));
                fit.rho_at(power)?
            }
            _ => bail!("--rho auto needs exactly one of --line-trace or --saturation"),
        },
        value => {
            let rho: f64 = value
                .parse()
                .with_context(|| format!("bad rho `{value}`"))?;
            RhoEstimate::direct(rho)?
        }
    };

    let corrected = background_correct(&measured, &rho)?;
    let csv_path = config.out_dir.join(format!("{}.csv", config.prefix));
    let mut out = Vec::new();
    writeln!(
        out,
        "tau_s,g2,err_plus,err_minus,raw_counts,systematic_band"
    )?;
    for i in 0..curve.tau.len() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            curve.tau[i],
            corrected.result.g2()[i],
            corrected.result.err_plus()[i],
            corrected.result.err_minus()[i],
            curve.raw_counts[i],
            corrected.systematic_band[i],
        )?;
    }
    fs::write(&csv_path, out)?;

    if let Some(irf_path) = &config.irf {
        let samples = util::read_xy_csv(irf_path)?;
        let (times, weights): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
        let irf = IrfHistogram::from_samples(times, weights)?;
        let step = curve.tau[1] - curve.tau[0];
        let rebinned = irf.rebin(step)?;
        let rows: Vec<(f64, f64)> = rebinned
            .times()
            .iter()
            .copied()
            .zip(rebinned.weights().iter().copied())
            .collect();
        let irf_out = config.out_dir.join(format!("{}_irf.csv", config.prefix));
        util::write_xy_csv(&irf_out, "time_s,weight", &rows)?;
        println!("wrote {}", irf_out.display());
    }

    let method = match rho.method() {
        RhoMethod::LineTrace => "line-trace",
        RhoMethod::Saturation => "saturation",
        RhoMethod::DirectBackground => "direct",
    };
    let warnings: Vec<String> = fit_warnings
        .into_iter()
        .chain(corrected.warnings.iter().map(|w| format!("{w:?}")))
        .collect();
    for warning in &warnings {
        eprintln!("warning: {warning}");
    }
    super::write_report(
        &config.out_dir,
        &config.prefix,
        &serde_json::json!({
            "rho": rho.rho(),
            "rho_uncertainty": rho.uncertainty(),
            "method": method,
            "warnings": warnings,
        }),
    )?;
    println!(
        "wrote {} (rho = {:.6}, {method})",
        csv_path.display(),
        rho.rho()
    );
    Ok(())
}
