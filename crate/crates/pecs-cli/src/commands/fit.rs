//! `pecs fit`: empirical multi-exponential fits over a sweep of level
//! counts, ranked by the Akaike information criterion.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args as ClapArgs;
use pecs_core::corrections::IrfHistogram;
use pecs_core::fitting::{compare_models, fit_sweep_with, FitOptions, G2Data};
use serde::{Deserialize, Serialize};

use crate::util;

#[derive(ClapArgs)]
pub struct Args {
    /// Re-run from an echoed config (replaces all other flags).
    #[arg(long, exclusive = true)]
    config: Option<PathBuf>,
    /// g2 curve CSV (measured or corrected).
    #[arg(long, required_unless_present = "config")]
    g2: Option<PathBuf>,
    /// Level counts to fit: `3`, `2,3,4`, or `2..5`.
    #[arg(long, default_value = "2..5")]
    n: String,
    /// Measured IRF histogram on the data's bin width; the fit then
    /// compares data against the convolved model.
    #[arg(long)]
    irf: Option<PathBuf>,
    /// Seed for the multi-start jitter.
    #[arg(long, default_value_t = crate::DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, default_value = "fit")]
    prefix: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    g2: PathBuf,
    n: String,
    irf: Option<PathBuf>,
    seed: u64,
    out_dir: PathBuf,
    prefix: String,
}

#[derive(Serialize)]
struct ComponentReport {
    amplitude: f64,
    amplitude_error: f64,
    timescale_s: f64,
    timescale_error_s: f64,
}

#[derive(Serialize)]
struct FitReport {
    n_levels: usize,
    antibunching: ComponentReport,
    bunching: Vec<ComponentReport>,
    chi2: f64,
    chi2_reduced: f64,
    n_points: usize,
    n_params: usize,
    log_likelihood: f64,
    aic: f64,
    relative_likelihood: f64,
    warnings: Vec<String>,
}

pub fn run(args: Args) -> Result<()> {
    let config = super::load_or_build(&args.config, || {
        Ok(Config {
            g2: super::resolve_input(args.g2.as_ref().unwrap())?,
            n: args.n.clone(),
            irf: args.irf.as_deref().map(super::resolve_input).transpose()?,
            seed: args.seed,
            out_dir: super::resolve_out_dir(&args.out_dir)?,
            prefix: args.prefix.clone(),
        })
    })?;
    super::echo_config(&config.out_dir, &config.prefix, &config)?;

    let curve = util::read_g2_csv(&config.g2)?;
    let sigma: Vec<f64> = curve
        .err_plus
        .iter()
        .zip(&curve.err_minus)
        .map(|(&p, &m)| 0.5 * (p + m))
        .collect();
    let data = G2Data::new(curve.tau.clone(), curve.g2.clone(), sigma)?;

    let irf = match &config.irf {
        Some(path) => {
            let samples = util::read_xy_csv(path)?;
            let (times, weights): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
            Some(IrfHistogram::from_samples(times, weights)?)
        }
        None => None,
    };

    let levels = util::parse_level_counts(&config.n)?;
    let options = FitOptions {
        seed: config.seed,
        ..FitOptions::default()
    };
    let fits = fit_sweep_with(&data, &levels, irf.as_ref(), &options)?;
    let ranked = compare_models(fits)?;

    let best = &ranked[0].fit;
    let best_n = best.model.n_levels();
    // Best-fit curve for overlays, through the IRF when one was used.
    let rows: Vec<(f64, f64)> = curve
        .tau
        .iter()
        .map(|&t| {
            let value = match &irf {
                Some(irf) => irf
                    .weights()
                    .iter()
                    .zip(irf.times())
                    .map(|(&w, &tk)| w * best.model.evaluate(t - tk))
                    .sum(),
                None => best.model.evaluate(t),
            };
            (t, value)
        })
        .collect();
    let curve_path = config
        .out_dir
        .join(format!("{}_best_curve.csv", config.prefix));
    util::write_xy_csv(&curve_path, "tau_s,g2_fit", &rows)?;

    let reports: Vec<FitReport> = ranked
        .iter()
        .map(|entry| {
            let f = &entry.fit;
            let errors = f.parameter_errors();
            let bunching = f
                .model
                .bunching()
                .iter()
                .enumerate()
                .map(|(k, &(c, tau))| ComponentReport {
                    amplitude: c,
                    amplitude_error: errors[2 + 2 * k],
                    timescale_s: tau,
                    timescale_error_s: errors[3 + 2 * k],
                })
                .collect();
            FitReport {
                n_levels: f.model.n_levels(),
                antibunching: ComponentReport {
                    amplitude: f.model.antibunching_amplitude(),
                    amplitude_error: errors[0],
                    timescale_s: f.model.antibunching_timescale(),
                    timescale_error_s: errors[1],
                },
                bunching,
                chi2: f.chi2,
                chi2_reduced: f.chi2_reduced,
                n_points: f.n_points,
                n_params: f.n_params,
                log_likelihood: f.log_likelihood,
                aic: f.aic,
                relative_likelihood: entry.relative_likelihood,
                warnings: f.warnings.iter().map(|w| format!("{w:?}")).collect(),
            }
        })
        .collect();
    super::write_report(
        &config.out_dir,
        &config.prefix,
        &serde_json::json!({ "best_n": best_n, "results": reports }),
    )?;
    println!(
        "best model: n = {best_n} (chi2_red = {:.3}, tau1 = {:.4e} s); wrote {}",
        best.chi2_reduced,
        best.model.antibunching_timescale(),
        curve_path.display()
    );
    Ok(())
}
