//! `pecs reproduce`: regenerate the bundled simulation studies: the
//! waiting-time/autocorrelation comparison, the timing-jitter effect on
//! g²(0), and the four rate-model families under power and field sweeps.
//! Everything is simulated, so the outputs are fully deterministic.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use clap::Args as ClapArgs;
use pecs_core::conv::UniformGrid;
use pecs_core::corrections::{convolve_with_irf, IrfHistogram};
use pecs_core::dynamics::{build_model, default_time_grid, simulate_g2, ModelTemplate, SpinParams};
use pecs_core::waiting_time::waiting_two_level;
use serde::{Deserialize, Serialize};

use crate::svg::{render, PlotOptions, Series};
use crate::util;

use super::fmt_num;

#[derive(ClapArgs)]
pub struct Args {
    /// Re-run from an echoed config (replaces all other flags).
    #[arg(long, exclusive = true)]
    config: Option<PathBuf>,
    /// Target study: fig2b, fig4, fig5a, fig5b, fig5c, fig5d, or all.
    #[arg(required_unless_present = "config")]
    target: Option<String>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    target: String,
    out_dir: PathBuf,
}

pub fn run(args: Args) -> Result<()> {
    let config = super::load_or_build(&args.config, || {
        Ok(Config {
            target: args.target.clone().unwrap(),
            out_dir: super::resolve_out_dir(&args.out_dir)?,
        })
    })?;
    super::echo_config(
        &config.out_dir,
        &format!("reproduce_{}", config.target),
        &config,
    )?;

    let mut written = Vec::new();
    match config.target.as_str() {
        "fig2b" => fig2b(&config.out_dir, &mut written)?,
        "fig4" => fig4(&config.out_dir, &mut written)?,
        "fig5a" => fig5_power(
            &config.out_dir,
            ModelTemplate::ThreeLevelSpontaneous,
            "fig5a",
            &mut written,
        )?,
        "fig5b" => fig5_power(
            &config.out_dir,
            ModelTemplate::ThreeLevelPumped,
            "fig5b",
            &mut written,
        )?,
        "fig5c" => fig5_spin(
            &config.out_dir,
            ModelTemplate::FiveLevelSpin,
            "fig5c",
            &mut written,
        )?,
        "fig5d" => fig5_spin(
            &config.out_dir,
            ModelTemplate::NvNineLevel,
            "fig5d",
            &mut written,
        )?,
        "all" => {
            fig2b(&config.out_dir, &mut written)?;
            fig4(&config.out_dir, &mut written)?;
            fig5_power(
                &config.out_dir,
                ModelTemplate::ThreeLevelSpontaneous,
                "fig5a",
                &mut written,
            )?;
            fig5_power(
                &config.out_dir,
                ModelTemplate::ThreeLevelPumped,
                "fig5b",
                &mut written,
            )?;
            fig5_spin(
                &config.out_dir,
                ModelTemplate::FiveLevelSpin,
                "fig5c",
                &mut written,
            )?;
            fig5_spin(
                &config.out_dir,
                ModelTemplate::NvNineLevel,
                "fig5d",
                &mut written,
            )?;
        }
        other => bail!("unknown reproduce target `{other}`"),
    }

    super::write_report(
        &config.out_dir,
        &format!("reproduce_{}", config.target),
        &serde_json::json!({ "target": config.target, "files": written }),
    )?;
    println!("reproduced {}: {} files", config.target, written.len());
    Ok(())
}

fn note(written: &mut Vec<String>, path: &Path) {
    written.push(path.display().to_string());
}

/// Waiting-time vs autocorrelation for a two-level emitter: one family of
/// peak-normalized W curves per collection efficiency, at balanced and
/// strongly imbalanced pump/emission rates, against the closed-form g².
fn fig2b(out_dir: &Path, written: &mut Vec<String>) -> Result<()> {
    const MHZ: f64 = 1e6;
    let sigma = 100.0 * MHZ;
    let grid = UniformGrid::with_extent(0.05e-9, 120.0 / sigma);
    let times = grid.times();

    let g2_rows: Vec<(f64, f64)> = times
        .iter()
        .map(|&t| (t, 1.0 - (-sigma * t).exp()))
        .collect();
    let g2_path = out_dir.join("fig2b_g2.csv");
    util::write_xy_csv(&g2_path, "tau_s,g2", &g2_rows)?;
    note(written, &g2_path);

    let mut series = vec![Series {
        label: "g2 (closed form)".into(),
        x: times.clone(),
        y: g2_rows.iter().map(|r| r.1).collect(),
        errors: None,
    }];
    // alpha = 0: balanced rates; alpha = 0.8: strongly pumped.
    for &(alpha_label, ge, eg) in &[
        ("alpha0", 50.0 * MHZ, 50.0 * MHZ),
        ("alpha0p8", 10.0 * MHZ, 90.0 * MHZ),
    ] {
        for &c in &[1.0, 0.5, 0.1, 0.01] {
            let curve = waiting_two_level(ge, eg, c, grid)?;
            let peak = curve.values().iter().fold(0.0f64, |m, &v| m.max(v));
            let rows: Vec<(f64, f64)> = times
                .iter()
                .zip(curve.values())
                .map(|(&t, &w)| (t, w / peak))
                .collect();
            let path = out_dir.join(format!("fig2b_w_c{}_{alpha_label}.csv", fmt_num(c)));
            util::write_xy_csv(&path, "tau_s,w_normalized", &rows)?;
            note(written, &path);
            if alpha_label == "alpha0" {
                series.push(Series {
                    label: format!("W, C = {c}"),
                    x: times.clone(),
                    y: rows.iter().map(|r| r.1).collect(),
                    errors: None,
                });
            }
        }
    }
    let svg_path = out_dir.join("fig2b.svg");
    let options = PlotOptions {
        title: "Waiting time vs autocorrelation (two-level)".into(),
        y_label: "normalized".into(),
        ..Default::default()
    };
    fs::write(&svg_path, render(&series, &options)?)?;
    note(written, &svg_path);
    Ok(())
}

/// Timing-jitter effect: convolved g²(0) against tau1/sigma and bunching
/// amplitude, plus example convolved curves.
fn fig4(out_dir: &Path, written: &mut Vec<String>) -> Result<()> {
    let sigma = 1.0e-9;
    let step = sigma / 10.0;
    let irf = IrfHistogram::gaussian(sigma, step)?;

    let convolved = |c2: f64, tau1: f64, tau2: f64| -> Result<Vec<f64>> {
        let half = ((8.0 * tau2) / step).ceil() as i64;
        let curve: Vec<f64> = (-half..=half)
            .map(|k| {
                let t = (k as f64 * step).abs();
                1.0 - (1.0 + c2) * (-t / tau1).exp() + c2 * (-t / tau2).exp()
            })
            .collect();
        Ok(convolve_with_irf(&curve, step, &irf)?)
    };
    let zero_of = |values: &[f64]| values[values.len() / 2];

    // Lower panels: g2(0) vs tau1/sigma at C2 = 1.5, tau2/sigma = 30.
    let ratios: Vec<f64> = (0..=18)
        .map(|k| 1.0 * 10f64.powf(k as f64 / 18.0))
        .collect();
    let mut rows = Vec::new();
    for &r in &ratios {
        rows.push((r, zero_of(&convolved(1.5, r * sigma, 30.0 * sigma)?)));
    }
    let lower_path = out_dir.join("fig4_lower_g2zero_vs_tau1.csv");
    util::write_xy_csv(&lower_path, "tau1_over_sigma,g2_zero", &rows)?;
    note(written, &lower_path);

    // Upper panels: g2(0) vs C2 at tau1/sigma = 2, tau2/sigma = 30.
    let mut rows = Vec::new();
    for k in 0..=12 {
        let c2 = 0.25 + k as f64 * 0.25;
        rows.push((c2, zero_of(&convolved(c2, 2.0 * sigma, 30.0 * sigma)?)));
    }
    let upper_path = out_dir.join("fig4_upper_g2zero_vs_c2.csv");
    util::write_xy_csv(&upper_path, "c2,g2_zero", &rows)?;
    note(written, &upper_path);

    // Example curves for three tau1/sigma ratios.
    let mut series = Vec::new();
    for &r in &[10.0, 3.0, 1.0] {
        let values = convolved(1.5, r * sigma, 30.0 * sigma)?;
        let half = (values.len() / 2) as i64;
        let rows: Vec<(f64, f64)> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| ((i as i64 - half) as f64 * step / sigma, v))
            .filter(|&(x, _)| x.abs() <= 60.0)
            .collect();
        let path = out_dir.join(format!("fig4_curve_ratio{}.csv", fmt_num(r)));
        util::write_xy_csv(&path, "tau_over_sigma,g2_convolved", &rows)?;
        note(written, &path);
        series.push(Series {
            label: format!("tau1/sigma = {r}"),
            x: rows.iter().map(|r| r.0).collect(),
            y: rows.iter().map(|r| r.1).collect(),
            errors: None,
        });
    }
    let svg_path = out_dir.join("fig4.svg");
    let options = PlotOptions {
        title: "IRF convolution at C2 = 1.5, tau2/sigma = 30".into(),
        x_label: "tau / sigma".into(),
        ..Default::default()
    };
    fs::write(&svg_path, render(&series, &options)?)?;
    note(written, &svg_path);
    Ok(())
}

fn simulate_rows(model: &pecs_core::dynamics::RateModel) -> Result<Vec<(f64, f64)>> {
    let times = default_time_grid(model, 400)?;
    let sim = simulate_g2(model, &times)?;
    Ok(sim.times.into_iter().zip(sim.g2).collect())
}

/// Power sweep of a three-level family at the tabulated excitation rates.
fn fig5_power(
    out_dir: &Path,
    template: ModelTemplate,
    stem: &str,
    written: &mut Vec<String>,
) -> Result<()> {
    let mut series = Vec::new();
    for &kex in &template.tabulated_kex_mhz() {
        let model = build_model(template, kex, None)?;
        let rows = simulate_rows(&model)?;
        let path = out_dir.join(format!("{stem}_kex{}.csv", fmt_num(kex)));
        util::write_xy_csv(&path, "tau_s,g2", &rows)?;
        note(written, &path);
        series.push(Series {
            label: format!("k_ex = {kex} MHz"),
            x: rows.iter().map(|r| r.0).collect(),
            y: rows.iter().map(|r| r.1).collect(),
            errors: None,
        });
    }
    let svg_path = out_dir.join(format!("{stem}.svg"));
    let options = PlotOptions {
        title: format!("{} power sweep", template.name()),
        log_x: true,
        ..Default::default()
    };
    fs::write(&svg_path, render(&series, &options)?)?;
    note(written, &svg_path);
    Ok(())
}

/// Spin templates: power sweep at the axial field plus an angle sweep at
/// the middle power.
fn fig5_spin(
    out_dir: &Path,
    template: ModelTemplate,
    stem: &str,
    written: &mut Vec<String>,
) -> Result<()> {
    let field = template.tabulated_field_gauss().expect("spin template");
    let angles = template.tabulated_angles_deg().expect("spin template");
    let powers = template.tabulated_kex_mhz();

    for &kex in &powers {
        let spin = SpinParams::field(field, angles[0]);
        let model = build_model(template, kex, Some(&spin))?;
        let rows = simulate_rows(&model)?;
        let path = out_dir.join(format!("{stem}_kex{}.csv", fmt_num(kex)));
        util::write_xy_csv(&path, "tau_s,g2", &rows)?;
        note(written, &path);
    }

    let mut series = Vec::new();
    for &angle in &angles {
        let spin = SpinParams::field(field, angle);
        let model = build_model(template, powers[1], Some(&spin))?;
        let rows = simulate_rows(&model)?;
        let path = out_dir.join(format!("{stem}_angle{}.csv", fmt_num(angle)));
        util::write_xy_csv(&path, "tau_s,g2", &rows)?;
        note(written, &path);
        series.push(Series {
            label: format!("angle = {angle} deg"),
            x: rows.iter().map(|r| r.0).collect(),
            y: rows.iter().map(|r| r.1).collect(),
            errors: None,
        });
    }
    let svg_path = out_dir.join(format!("{stem}.svg"));
    let options = PlotOptions {
        title: format!("{} angle sweep at {field} G", template.name()),
        log_x: true,
        ..Default::default()
    };
    fs::write(&svg_path, render(&series, &options)?)?;
    note(written, &svg_path);
    Ok(())
}
