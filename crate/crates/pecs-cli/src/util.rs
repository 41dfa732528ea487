//! File helpers shared by the subcommands: curve CSV formats and the
//! reconstruction of delay axes from bin centers.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use pecs_core::correlator::{CorrelationResult, TauAxis, TauScale};

/// A g² curve as stored on disk: `tau_s,g2,err_plus,err_minus,raw_counts`
/// with optional extra columns.
pub struct G2Csv {
    pub tau: Vec<f64>,
    pub g2: Vec<f64>,
    pub err_plus: Vec<f64>,
    pub err_minus: Vec<f64>,
    pub raw_counts: Vec<u64>,
}

pub fn write_g2_csv(path: &Path, result: &CorrelationResult) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "tau_s,g2,err_plus,err_minus,raw_counts")?;
    for (((&tau, &g), (&ep, &em)), &m) in result
        .tau_centers()
        .iter()
        .zip(result.g2())
        .zip(result.err_plus().iter().zip(result.err_minus()))
        .zip(result.raw_counts())
    {
        writeln!(out, "{tau},{g},{ep},{em},{m}")?;
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_g2_csv(path: &Path) -> Result<G2Csv> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut curve = G2Csv {
        tau: Vec::new(),
        g2: Vec::new(),
        err_plus: Vec::new(),
        err_minus: Vec::new(),
        raw_counts: Vec::new(),
    };
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 4 {
            if idx == 0 {
                continue; // header
            }
            bail!(
                "{}:{}: expected at least 4 columns",
                path.display(),
                idx + 1
            );
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .with_context(|| format!("{}:{}: bad number `{s}`", path.display(), idx + 1))
        };
        match parse(fields[0]) {
            Err(e) => {
                if idx == 0 {
                    continue; // header
                }
                return Err(e);
            }
            Ok(tau) => {
                curve.tau.push(tau);
                curve.g2.push(parse(fields[1])?);
                curve.err_plus.push(parse(fields[2])?);
                curve.err_minus.push(parse(fields[3])?);
                curve.raw_counts.push(if fields.len() > 4 {
                    fields[4].parse().unwrap_or(0)
                } else {
                    0
                });
            }
        }
    }
    if curve.tau.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok(curve)
}

/// Two-column `x,y` CSV with an optional header line.
pub fn read_xy_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let x = fields.next().unwrap_or("");
        let y = fields.next().unwrap_or("");
        match (x.parse::<f64>(), y.parse::<f64>()) {
            (Ok(x), Ok(y)) => out.push((x, y)),
            _ if idx == 0 => continue, // header
            _ => bail!("{}:{}: expected two numbers", path.display(), idx + 1),
        }
    }
    if out.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok(out)
}

pub fn write_xy_csv(path: &Path, header: &str, rows: &[(f64, f64)]) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "{header}")?;
    for &(x, y) in rows {
        writeln!(out, "{x},{y}")?;
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Rebuilds a delay axis from stored bin centers: edges are successive
/// reflections `e_{k+1} = 2 c_k - e_k`. Exact for any axis whose centers
/// are arithmetic midpoints, which is how every axis here is written.
pub fn axis_from_centers(centers: &[f64]) -> Result<TauAxis> {
    if centers.len() < 2 {
        bail!("need at least two bins to rebuild a delay axis");
    }
    let mut edges = Vec::with_capacity(centers.len() + 1);
    let first = centers[0] - 0.5 * (centers[1] - centers[0]);
    edges.push(first);
    for &c in centers {
        let prev = *edges.last().unwrap();
        edges.push(2.0 * c - prev);
    }
    Ok(TauAxis::from_edges(edges, TauScale::Linear)?)
}

/// `a:b,c:d` count-rate ranges; `inf` is accepted as an upper bound.
pub fn parse_rate_ranges(text: &str) -> Result<Vec<pecs_core::correlator::RateRange>> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let mut bounds = part.split(':');
        let (lo, hi) = (bounds.next().unwrap_or(""), bounds.next().unwrap_or(""));
        if bounds.next().is_some() {
            bail!("bad range `{part}`: expected low:high");
        }
        let lo: f64 = lo
            .trim()
            .parse()
            .with_context(|| format!("bad bound `{lo}`"))?;
        let hi: f64 = if hi.trim().eq_ignore_ascii_case("inf") {
            f64::INFINITY
        } else {
            hi.trim()
                .parse()
                .with_context(|| format!("bad bound `{hi}`"))?
        };
        out.push(pecs_core::correlator::RateRange::new(lo, hi));
    }
    Ok(out)
}

/// `2`, `2,3,4`, or `2..5` (inclusive) level counts.
pub fn parse_level_counts(text: &str) -> Result<Vec<usize>> {
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: usize = lo.trim().parse().context("bad level range")?;
        let hi: usize = hi.trim().parse().context("bad level range")?;
        if lo < 2 || hi < lo {
            bail!("bad level range `{text}`");
        }
        return Ok((lo..=hi).collect());
    }
    text.split(',')
        .map(|s| {
            let n: usize = s
                .trim()
                .parse()
                .with_context(|| format!("bad level count `{s}`"))?;
            if n < 2 {
                bail!("level count must be >= 2");
            }
            Ok(n)
        })
        .collect()
}
