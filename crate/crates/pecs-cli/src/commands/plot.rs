//! `pecs plot`: static SVG figures from curve CSVs.

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args as ClapArgs;
use serde::{Deserialize, Serialize};

use crate::svg::{render, PlotOptions, Series};
use crate::util;

#[derive(ClapArgs)]
pub struct Args {
    /// Re-run from an echoed config (replaces all other flags).
    #[arg(long, exclusive = true)]
    config: Option<PathBuf>,
    /// Curve CSVs (g2 5-column or generic x,y).
    #[arg(long = "in", required_unless_present = "config", num_args = 1..)]
    inputs: Vec<PathBuf>,
    /// Output SVG path (default `<out-dir>/<prefix>.svg`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Logarithmic delay axis.
    #[arg(long)]
    log_x: bool,
    #[arg(long, default_value = "")]
    title: String,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, default_value = "plot")]
    prefix: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    inputs: Vec<PathBuf>,
    out: Option<PathBuf>,
    log_x: bool,
    title: String,
    out_dir: PathBuf,
    prefix: String,
}

pub fn run(args: Args) -> Result<()> {
    let config = super::load_or_build(&args.config, || {
        Ok(Config {
            inputs: args
                .inputs
                .iter()
                .map(|p| super::resolve_input(p))
                .collect::<Result<_>>()?,
            out: args.out.clone(),
            log_x: args.log_x,
            title: args.title.clone(),
            out_dir: super::resolve_out_dir(&args.out_dir)?,
            prefix: args.prefix.clone(),
        })
    })?;
    super::echo_config(&config.out_dir, &config.prefix, &config)?;

    let mut series = Vec::new();
    for path in &config.inputs {
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        // Prefer the full g2 format (keeps error bars); fall back to x,y.
        match util::read_g2_csv(path) {
            Ok(curve) => {
                let has_errors = curve.err_plus.iter().any(|&e| e > 0.0);
                series.push(Series {
                    label,
                    x: curve.tau,
                    y: curve.g2,
                    errors: has_errors.then_some((curve.err_plus, curve.err_minus)),
                });
            }
            Err(_) => {
                let rows = util::read_xy_csv(path)?;
                let (x, y) = rows.into_iter().unzip();
                series.push(Series {
                    label,
                    x,
                    y,
                    errors: None,
                });
            }
        }
    }

    let options = PlotOptions {
        title: config.title.clone(),
        log_x: config.log_x,
        ..Default::default()
    };
    let svg = render(&series, &options)?;
    let out = config
        .out
        .clone()
        .unwrap_or_else(|| config.out_dir.join(format!("{}.svg", config.prefix)));
    fs::write(&out, svg).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {}", out.display());
    Ok(())
}
