//! Subcommand implementations.
//!
//! Each subcommand resolves its arguments into a serializable config
//! (either from flags or, exclusively, from `--config <json>`), echoes
//! that config into the output directory for provenance, then runs.
//! Unknown keys in config files are rejected.

mod correct;
mod correlate;
mod fit;
mod gillespie;
mod import;
mod plot;
mod reproduce;
mod simulate;
mod trace;
mod waiting;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Subcommand;
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Subcommand)]
pub enum Command {
    /// Validate and summarize a time-tagged stream (TTAG1 or CSV).
    Import(import::Args),
    /// Per-channel count rates on a uniform time grid.
    Trace(trace::Args),
    /// Normalized cross-correlation g2(tau) with Poisson errors.
    Correlate(correlate::Args),
    /// Background correction via the signal fraction rho.
    Correct(correct::Args),
    /// Multi-exponential fits with AIC model selection.
    Fit(fit::Args),
    /// Simulate g2(tau) from an n-level rate model.
    Simulate(simulate::Args),
    /// Synthesize a photon stream from a rate model.
    Gillespie(gillespie::Args),
    /// Analytic/numerical waiting-time distributions.
    Waiting(waiting::Args),
    /// Regenerate the bundled simulation studies.
    Reproduce(reproduce::Args),
    /// Render curve CSVs as an SVG figure.
    Plot(plot::Args),
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Import(args) => import::run(args),
        Command::Trace(args) => trace::run(args),
        Command::Correlate(args) => correlate::run(args),
        Command::Correct(args) => correct::run(args),
        Command::Fit(args) => fit::run(args),
        Command::Simulate(args) => simulate::run(args),
        Command::Gillespie(args) => gillespie::run(args),
        Command::Waiting(args) => waiting::run(args),
        Command::Reproduce(args) => reproduce::run(args),
        Command::Plot(args) => plot::run(args),
    }
}

/// Loads the config from `--config` or builds it from the flags.
pub(crate) fn load_or_build<T: DeserializeOwned>(
    config: &Option<PathBuf>,
    build: impl FnOnce() -> Result<T>,
) -> Result<T> {
    match config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", path.display()))
        }
        None => build(),
    }
}

/// Canonicalizes an input path so the echoed config replays from anywhere.
pub(crate) fn resolve_input(path: &Path) -> Result<PathBuf> {
    fs::canonicalize(path).with_context(|| format!("resolving {}", path.display()))
}

/// Creates and canonicalizes the output directory.
pub(crate) fn resolve_out_dir(path: &Path) -> Result<PathBuf> {
    fs::create_dir_all(path)
        .with_context(|| format!("creating output directory {}", path.display()))?;
    fs::canonicalize(path).with_context(|| format!("resolving {}", path.display()))
}

/// Writes the resolved config next to the outputs before running.
pub(crate) fn echo_config<T: Serialize>(out_dir: &Path, prefix: &str, config: &T) -> Result<()> {
    let path = out_dir.join(format!("{prefix}_config.json"));
    let text = serde_json::to_string_pretty(config)?;
    fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub(crate) fn write_report<T: Serialize>(out_dir: &Path, prefix: &str, report: &T) -> Result<()> {
    let path = out_dir.join(format!("{prefix}_report.json"));
    let text = serde_json::to_string_pretty(report)?;
    fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Builds a rate model from a template name (with `--kex` and optional
/// field) or from a JSON model file.
pub(crate) fn resolve_model(
    model: &str,
    k_ex_mhz: Option<f64>,
    b_amp_gauss: Option<f64>,
    b_angle_deg: Option<f64>,
) -> Result<pecs_core::dynamics::RateModel> {
    use pecs_core::dynamics::{build_model, model_from_file, ModelTemplate, SpinParams};
    if let Ok(template) = model.parse::<ModelTemplate>() {
        let k_ex = k_ex_mhz.context("template models need --kex <MHz>")?;
        let spin = b_amp_gauss.map(|b| SpinParams::field(b, b_angle_deg.unwrap_or(0.0)));
        Ok(build_model(template, k_ex, spin.as_ref())?)
    } else {
        let path = Path::new(model);
        if !path.exists() {
            anyhow::bail!(
                "`{model}` is neither a template name (three-level-spontaneous, \
                 three-level-pumped, five-level-spin, nv-nine-level) nor a model file"
            );
        }
        Ok(model_from_file(path)?)
    }
}

/// `13.125` -> `13p125`, for filenames.
pub(crate) fn fmt_num(value: f64) -> String {
    format!("{value}").replace('.', "p").replace('-', "m")
}
