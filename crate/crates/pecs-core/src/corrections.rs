//! Corrections for systematic effects in measured correlation data:
//! uncorrelated background via the signal fraction ρ, and detector timing
//! jitter via convolution with the measured instrument response.
//!
//! Background enters as `g2_meas = 1 - ρ² + g2 ρ²` with
//! `ρ = I_em / (I_em + I_bg)`; correction inverts that map. Timing jitter
//! is never deconvolved (deconvolution amplifies noise); instead model
//! curves are convolved with the IRF inside fits and comparisons.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::correlator::CorrelationResult;
use crate::levmar::{self, LmOptions, Residuals};

#[derive(Debug, Error)]
pub enum CorrectionsError {
    #[error("signal fraction rho must lie in (0, 1], got {0}")]
    BadRho(f64),
    #[error("fit failed: {0}")]
    FitFailed(String),
    #[error("degenerate input: {0}")]
    Rank(String),
    #[error("grid mismatch: {0}")]
    Grid(String),
    #[error("{0}")]
    Domain(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum CorrectionWarning {
    /// Corrected g² dipped below zero beyond its error bar in these bins,
    /// hinting at an inconsistent ρ or model.
    NegativeCorrected { bins: usize },
    /// A best-fit offset came out negative and was clamped to zero.
    ClampedOffset { value: f64 },
    /// A best-fit background slope came out negative and was clamped.
    ClampedBackground { value: f64 },
}

/// How a signal fraction was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhoMethod {
    LineTrace,
    Saturation,
    DirectBackground,
}

/// Signal fraction ρ = I_em / (I_em + I_bg) with its uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoEstimate {
    rho: f64,
    method: RhoMethod,
    uncertainty: f64,
}

impl RhoEstimate {
    pub fn new(rho: f64, method: RhoMethod, uncertainty: f64) -> Result<Self, CorrectionsError> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(CorrectionsError::BadRho(rho));
        }
        Ok(Self {
            rho,
            method,
            uncertainty: uncertainty.abs(),
        })
    }

    /// A directly supplied value, e.g. from an off-emitter background
    /// measurement.
    pub fn direct(rho: f64) -> Result<Self, CorrectionsError> {
        Self::new(rho, RhoMethod::DirectBackground, 0.0)
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn method(&self) -> RhoMethod {
        self.method
    }

    pub fn uncertainty(&self) -> f64 {
        self.uncertainty
    }
}

/// Background-corrected correlation data.
///
/// The ρ uncertainty propagates into a separate per-bin systematic band
/// rather than into the statistical errors, since it is fully correlated
/// across bins while shot noise is not.
#[derive(Debug, Clone)]
pub struct BackgroundCorrected {
    pub result: CorrelationResult,
    pub systematic_band: Vec<f64>,
    pub warnings: Vec<CorrectionWarning>,
}

/// Applies the background model forward: `g2_meas = 1 - ρ² + g2 ρ²`.
pub fn background_apply(g2: &[f64], rho: &RhoEstimate) -> Vec<f64> {
    let r2 = rho.rho * rho.rho;
    g2.iter().map(|&g| 1.0 - r2 + g * r2).collect()
}

/// Removes uncorrelated background from a measured correlation:
/// `g2 = (g2_meas - 1 + ρ²) / ρ²`. Statistical errors scale by `1/ρ²`.
pub fn background_correct(
    measured: &CorrelationResult,
    rho: &RhoEstimate,
) -> Result<BackgroundCorrected, CorrectionsError> {
    let r = rho.rho;
    if !(r > 0.0 && r <= 1.0) {
        return Err(CorrectionsError::BadRho(r));
    }
    let r2 = r * r;
    let g2: Vec<f64> = measured.g2().iter().map(|&g| (g - 1.0 + r2) / r2).collect();
    let err_plus: Vec<f64> = measured.err_plus().iter().map(|&e| e / r2).collect();
    let err_minus: Vec<f64> = measured.err_minus().iter().map(|&e| e / r2).collect();
    // d g2 / d rho = -2 (g2_meas - 1) / rho^3.
    let systematic_band: Vec<f64> = measured
        .g2()
        .iter()
        .map(|&g| (2.0 * (g - 1.0) / (r2 * r)).abs() * rho.uncertainty)
        .collect();

    let negative = g2
        .iter()
        .zip(&err_minus)
        .filter(|&(&g, &em)| g < -em)
        .count();
    let mut warnings = Vec::new();
    if negative > 0 {
        warnings.push(CorrectionWarning::NegativeCorrected { bins: negative });
    }

    Ok(BackgroundCorrected {
        result: measured.with_values(g2, err_plus, err_minus),
        systematic_band,
        warnings,
    })
}

struct GaussianProfile {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Residuals for GaussianProfile {
    fn n_residuals(&self) -> usize {
        self.x.len()
    }
    fn eval(&self, p: &[f64], r: &mut DVector<f64>, j: &mut DMatrix<f64>) -> bool {
        let (amp, center, width, offset) = (p[0], p[1], p[2], p[3]);
        if width == 0.0 {
            return false;
        }
        for (i, (&x, &y)) in self.x.iter().zip(&self.y).enumerate() {
            let z = (x - center) / width;
            let e = (-0.5 * z * z).exp();
            r[i] = amp * e + offset - y;
            j[(i, 0)] = e;
            j[(i, 1)] = amp * e * z / width;
            j[(i, 2)] = amp * e * z * z / width;
            j[(i, 3)] = 1.0;
        }
        true
    }
}

/// Fits a Gaussian plus constant offset to a spatial intensity profile
/// across the emitter and returns `ρ = amplitude / (amplitude + offset)`.
///
/// A negative best-fit offset is clamped to zero with a warning (ρ = 1).
pub fn fit_line_trace(
    samples: &[(f64, f64)],
) -> Result<(RhoEstimate, Vec<CorrectionWarning>), CorrectionsError> {
    if samples.len() < 5 {
        return Err(CorrectionsError::Rank(format!(
            "need at least 5 profile samples, got {}",
            samples.len()
        )));
    }
    let x: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let (min_y, max_y) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let peak_x = x[y
        .iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, &v)| {
                if v > acc.1 {
                    (i, v)
                } else {
                    acc
                }
            },
        )
        .0];
    let span = x.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
        - x.iter().fold(f64::INFINITY, |m, &v| m.min(v));

    let problem = GaussianProfile { x, y };
    let init = [max_y - min_y, peak_x, span / 6.0, min_y];
    let out = levmar::minimize(&problem, &init, &LmOptions::default());
    if !out.converged || !out.chi2.is_finite() {
        return Err(CorrectionsError::FitFailed(
            "line-trace fit did not converge".into(),
        ));
    }
    let amp = out.params[0];
    let mut offset = out.params[3];
    if amp <= 0.0 {
        return Err(CorrectionsError::FitFailed(format!(
            "non-physical peak amplitude {amp}"
        )));
    }
    let mut warnings = Vec::new();
    if offset < 0.0 {
        warnings.push(CorrectionWarning::ClampedOffset { value: offset });
        offset = 0.0;
    }
    let rho = amp / (amp + offset);

    // Propagate (amp, offset) covariance through rho = a/(a+o).
    let uncertainty = levmar::covariance(&out.jtj)
        .map(|cov| {
            let denom = (amp + offset).powi(2);
            let da = offset / denom;
            let doff = -amp / denom;
            (da * da * cov[(0, 0)] + doff * doff * cov[(3, 3)] + 2.0 * da * doff * cov[(0, 3)])
                .max(0.0)
                .sqrt()
        })
        .unwrap_or(0.0);

    Ok((
        RhoEstimate::new(rho.min(1.0), RhoMethod::LineTrace, uncertainty)?,
        warnings,
    ))
}

/// Power-saturation fit `I(p) = I_sat p / (p_sat + p) + C_bg p`.
#[derive(Debug, Clone)]
pub struct SaturationFit {
    pub i_sat: f64,
    pub p_sat: f64,
    pub c_bg: f64,
    /// Covariance of `[I_sat, p_sat, C_bg]`.
    pub covariance: DMatrix<f64>,
    pub warnings: Vec<CorrectionWarning>,
}

impl SaturationFit {
    /// Model intensity at power `p`.
    pub fn intensity(&self, p: f64) -> f64 {
        self.i_sat * p / (self.p_sat + p) + self.c_bg * p
    }

    /// Signal fraction at power `p`: emitter term over total.
    pub fn rho_at(&self, p: f64) -> Result<RhoEstimate, CorrectionsError> {
        let total = self.intensity(p);
        if !(total > 0.0) {
            return Err(CorrectionsError::Domain(format!(
                "no intensity at power {p}"
            )));
        }
        let rho = (self.i_sat * p / (self.p_sat + p)) / total;
        RhoEstimate::new(rho.min(1.0), RhoMethod::Saturation, 0.0)
    }
}

struct SaturationProblem {
    p: Vec<f64>,
    i: Vec<f64>,
}

impl Residuals for SaturationProblem {
    fn n_residuals(&self) -> usize {
        self.p.len()
    }
    // Parameters are [ln I_sat, ln p_sat, C_bg] to keep the saturation
    // branch positive.
    fn eval(&self, q: &[f64], r: &mut DVector<f64>, j: &mut DMatrix<f64>) -> bool {
        if q[0].abs() > 500.0 || q[1].abs() > 500.0 {
            return false;
        }
        let (i_sat, p_sat, c_bg) = (q[0].exp(), q[1].exp(), q[2]);
        for (k, (&p, &i)) in self.p.iter().zip(&self.i).enumerate() {
            let denom = p_sat + p;
            let sat = i_sat * p / denom;
            r[k] = sat + c_bg * p - i;
            j[(k, 0)] = sat;
            j[(k, 1)] = -sat * p_sat / denom;
            j[(k, 2)] = p;
        }
        true
    }
}

/// Fits the empirical saturation curve to `(power, intensity)` samples.
pub fn fit_saturation(points: &[(f64, f64)]) -> Result<SaturationFit, CorrectionsError> {
    if points.len() < 4 {
        return Err(CorrectionsError::Rank(format!(
            "need at least 4 saturation points, got {}",
            points.len()
        )));
    }
    let mut powers: Vec<f64> = points.iter().map(|s| s.0).collect();
    powers.sort_by(f64::total_cmp);
    powers.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * a.abs().max(1.0));
    if powers.len() < 3 {
        return Err(CorrectionsError::Rank(
            "saturation data needs at least 3 distinct powers".into(),
        ));
    }

    let p: Vec<f64> = points.iter().map(|s| s.0).collect();
    let i: Vec<f64> = points.iter().map(|s| s.1).collect();
    let i_max = i.iter().fold(0.0f64, |m, &v| m.max(v));
    let p_mid = powers[powers.len() / 2];
    if !(i_max > 0.0) {
        return Err(CorrectionsError::Rank(
            "intensities are not positive".into(),
        ));
    }

    let problem = SaturationProblem { p, i };
    let mut best: Option<levmar::LmOutcome> = None;
    for scale in [1.0, 0.1, 10.0] {
        let init = [i_max.ln(), (p_mid * scale).ln(), 0.0];
        let out = levmar::minimize(&problem, &init, &LmOptions::default());
        let better = match &best {
            Some(b) => out.converged && out.chi2 < b.chi2,
            None => true,
        };
        if better {
            best = Some(out);
        }
    }
    let out = best.unwrap();
    if !out.converged || !out.chi2.is_finite() {
        return Err(CorrectionsError::FitFailed(
            "saturation fit did not converge".into(),
        ));
    }

    let i_sat = out.params[0].exp();
    let p_sat = out.params[1].exp();
    let mut c_bg = out.params[2];
    let mut warnings = Vec::new();
    if c_bg < 0.0 {
        warnings.push(CorrectionWarning::ClampedBackground { value: c_bg });
        c_bg = 0.0;
    }

    // Delta method back to linear parameters for the saturation pair.
    let cov_log = levmar::covariance(&out.jtj).unwrap_or_else(|| DMatrix::zeros(3, 3));
    let scale = DMatrix::from_diagonal(&DVector::from_vec(vec![i_sat, p_sat, 1.0]));
    let covariance = &scale * cov_log * &scale;

    Ok(SaturationFit {
        i_sat,
        p_sat,
        c_bg,
        covariance,
        warnings,
    })
}

/// Measured instrument-response distribution on a uniform time grid.
///
/// Weights are non-negative and sum to one, so convolution preserves the
/// mean of any curve and leaves constants fixed.
#[derive(Debug, Clone)]
pub struct IrfHistogram {
    times: Vec<f64>,
    weights: Vec<f64>,
    bin_width: f64,
    sigma: f64,
}

impl IrfHistogram {
    /// Builds from bin-center times and weights; the grid must be uniform.
    /// Weights are normalized to unit sum.
    pub fn from_samples(times: Vec<f64>, weights: Vec<f64>) -> Result<Self, CorrectionsError> {
        if times.len() != weights.len() || times.len() < 2 {
            return Err(CorrectionsError::Grid(
                "need at least two IRF samples".into(),
            ));
        }
        let bin_width = times[1] - times[0];
        if !(bin_width > 0.0) {
            return Err(CorrectionsError::Grid("IRF times must increase".into()));
        }
        for w in times.windows(2) {
            if ((w[1] - w[0]) - bin_width).abs() > 1e-6 * bin_width {
                return Err(CorrectionsError::Grid("IRF grid is not uniform".into()));
            }
        }
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(CorrectionsError::Domain(
                "IRF weights must be non-negative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(CorrectionsError::Domain("IRF weights sum to zero".into()));
        }
        let weights: Vec<f64> = weights.into_iter().map(|w| w / total).collect();
        let mean: f64 = times.iter().zip(&weights).map(|(&t, &w)| t * w).sum();
        let var: f64 = times
            .iter()
            .zip(&weights)
            .map(|(&t, &w)| w * (t - mean) * (t - mean))
            .sum();
        Ok(Self {
            times,
            weights,
            bin_width,
            sigma: var.max(0.0).sqrt(),
        })
    }

    /// Gaussian kernel of standard deviation `sigma`, sampled out to ±6σ
    /// and centered on zero delay.
    pub fn gaussian(sigma: f64, bin_width: f64) -> Result<Self, CorrectionsError> {
        if !(sigma > 0.0) || !(bin_width > 0.0) {
            return Err(CorrectionsError::Domain(format!(
                "gaussian IRF needs positive sigma and bin width, got {sigma}, {bin_width}"
            )));
        }
        let half = ((6.0 * sigma) / bin_width).ceil() as i64;
        let times: Vec<f64> = (-half..=half).map(|k| k as f64 * bin_width).collect();
        let weights: Vec<f64> = times
            .iter()
            .map(|&t| (-0.5 * (t / sigma).powi(2)).exp())
            .collect();
        Self::from_samples(times, weights)
    }

    /// A unit impulse: convolution with it is the identity.
    pub fn delta(bin_width: f64) -> Self {
        Self {
            times: vec![-bin_width, 0.0, bin_width],
            weights: vec![0.0, 1.0, 0.0],
            bin_width,
            sigma: 0.0,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    /// Standard deviation of the response distribution, seconds.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Re-bins by integration to an analysis bin width, conserving total
    /// weight. Source bins are treated as uniform densities.
    pub fn rebin(&self, target_width: f64) -> Result<Self, CorrectionsError> {
        if !(target_width > 0.0) {
            return Err(CorrectionsError::Grid(format!(
                "bad target width {target_width}"
            )));
        }
        let src_half = 0.5 * self.bin_width;
        let lo = self.times[0] - src_half;
        let hi = self.times[self.times.len() - 1] + src_half;
        let k_lo = (lo / target_width).floor() as i64;
        let k_hi = (hi / target_width).ceil() as i64;
        let times: Vec<f64> = (k_lo..k_hi)
            .map(|k| (k as f64 + 0.5) * target_width)
            .collect();
        let mut weights = vec![0.0; times.len()];
        for (&t, &w) in self.times.iter().zip(&self.weights) {
            let (a, b) = (t - src_half, t + src_half);
            for (k, &tc) in times.iter().enumerate() {
                let (ta, tb) = (tc - 0.5 * target_width, tc + 0.5 * target_width);
                let overlap = (b.min(tb) - a.max(ta)).max(0.0);
                weights[k] += w * overlap / self.bin_width;
            }
        }
        Self::from_samples(times, weights)
    }
}

/// Convolves a uniformly sampled model curve with the IRF:
/// `out(τ_i) = Σ_j w_j model(τ_i - t_j)`.
///
/// The model must be sampled at the IRF bin width; samples beyond the data
/// window are padded with the boundary values.
pub fn convolve_with_irf(
    values: &[f64],
    step: f64,
    irf: &IrfHistogram,
) -> Result<Vec<f64>, CorrectionsError> {
    if ((irf.bin_width - step) / step).abs() > 1e-6 {
        return Err(CorrectionsError::Grid(format!(
            "model step {step} does not match IRF bin width {}",
            irf.bin_width
        )));
    }
    if values.is_empty() {
        return Err(CorrectionsError::Domain("empty model curve".into()));
    }
    let offsets: Vec<i64> = irf
        .times
        .iter()
        .map(|&t| {
            let x = t / step;
            let k = x.round();
            if (x - k).abs() > 1e-6 {
                Err(CorrectionsError::Grid(format!(
                    "IRF time {t} is not on the model grid"
                )))
            } else {
                Ok(k as i64)
            }
        })
        .collect::<Result<_, _>>()?;
    let n = values.len();
    // Edge padding by the boundary values.
    let fetch = |idx: i64| -> f64 {
        if idx < 0 {
            values[0]
        } else if idx as usize >= n {
            values[n - 1]
        } else {
            values[idx as usize]
        }
    };
    Ok((0..n as i64)
        .map(|i| {
            irf.weights
                .iter()
                .zip(&offsets)
                .map(|(&w, &k)| w * fetch(i - k))
                .sum()
        })
        .collect())
}
