//! Empirical multi-exponential fits of g²(τ) and information-criterion
//! model selection.
//!
//! The fit model for an n-level emitter is
//!
//! ```text
//! g2(τ) = 1 - C1 e^{-|τ|/τ1} + Σ_{i=2}^{n-1} C_i e^{-|τ|/τ_i}
//! ```
//!
//! with a single antibunching term and non-negative bunching amplitudes.
//! Amplitudes and timescales are fit in log space, which enforces
//! positivity without explicit bounds. Model comparison uses
//! `AIC = 2p - 2 ln L` with the Gaussian likelihood of error-weighted
//! residuals, `ln L = -(N/2)(ln 2π + 1 - ln N + ln Σ x_i²)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::corrections::IrfHistogram;
use crate::correlator::CorrelationResult;
use crate::levmar::{self, LmOptions, Residuals};

/// Default seed for the deterministic multi-start jitter.
pub const DEFAULT_FIT_SEED: u64 = 0x5045_4353;

#[derive(Debug, Error)]
pub enum FittingError {
    #[error("invalid model: {0}")]
    BadModel(String),
    #[error("invalid data: {0}")]
    BadData(String),
    #[error("need at least {needed} bins to fit {params} parameters, got {got}")]
    TooFewBins {
        needed: usize,
        params: usize,
        got: usize,
    },
    #[error("fit did not converge after {starts} starts (best chi2 {chi2:.3e})")]
    NoConvergence {
        starts: usize,
        chi2: f64,
        best: Box<FitResult>,
    },
    #[error("every start diverged after {starts} attempts")]
    AllStartsFailed { starts: usize },
    #[error("grid mismatch: {0}")]
    Grid(String),
    #[error("no fits to compare")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FitWarning {
    /// A timescale ran far outside the sampled delay range.
    TimescaleAtBound { tau: f64 },
    /// An amplitude collapsed toward zero; the component is unresolved.
    VanishingAmplitude { amplitude: f64 },
    /// Residuals vanished identically; AIC is the -inf overfit sentinel.
    Overfit,
}

/// Empirical n-level correlation model (one antibunching term, `n - 2`
/// bunching terms). Evaluates symmetrically in τ and tends to 1 at long
/// delays.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalModel {
    antibunching_amplitude: f64,
    antibunching_timescale: f64,
    bunching: Vec<(f64, f64)>,
}

impl EmpiricalModel {
    pub fn new(
        antibunching_amplitude: f64,
        antibunching_timescale: f64,
        bunching: Vec<(f64, f64)>,
    ) -> Result<Self, FittingError> {
        if !(antibunching_amplitude >= 0.0) || !antibunching_amplitude.is_finite() {
            return Err(FittingError::BadModel(format!(
                "antibunching amplitude {antibunching_amplitude} must be >= 0"
            )));
        }
        if !(antibunching_timescale > 0.0) {
            return Err(FittingError::BadModel(format!(
                "antibunching timescale {antibunching_timescale} must be > 0"
            )));
        }
        for &(c, tau) in &bunching {
            if !(c >= 0.0) || !(tau > 0.0) || !c.is_finite() {
                return Err(FittingError::BadModel(format!(
                    "bunching component ({c}, {tau}) must have C >= 0, tau > 0"
                )));
            }
        }
        let mut model = Self {
            antibunching_amplitude,
            antibunching_timescale,
            bunching,
        };
        // Distinct, ordered timescales: tau_2 < tau_3 < ...
        model.bunching.sort_by(|a, b| a.1.total_cmp(&b.1));
        Ok(model)
    }

    pub fn two_level(c1: f64, tau1: f64) -> Result<Self, FittingError> {
        Self::new(c1, tau1, Vec::new())
    }

    /// Number of levels `n`; parameters count `2(n-1)`.
    pub fn n_levels(&self) -> usize {
        2 + self.bunching.len()
    }

    pub fn param_count(&self) -> usize {
        2 * (self.n_levels() - 1)
    }

    pub fn antibunching_amplitude(&self) -> f64 {
        self.antibunching_amplitude
    }

    pub fn antibunching_timescale(&self) -> f64 {
        self.antibunching_timescale
    }

    /// Bunching `(C_i, τ_i)` pairs ordered by timescale.
    pub fn bunching(&self) -> &[(f64, f64)] {
        &self.bunching
    }

    /// All timescales: antibunching first, then bunching in order.
    pub fn timescales(&self) -> Vec<f64> {
        let mut out = vec![self.antibunching_timescale];
        out.extend(self.bunching.iter().map(|&(_, tau)| tau));
        out
    }

    /// Evaluates the model at delay τ (symmetric in sign).
    pub fn evaluate(&self, tau: f64) -> f64 {
        let t = tau.abs();
        let mut g = 1.0 - self.antibunching_amplitude * (-t / self.antibunching_timescale).exp();
        for &(c, tau_i) in &self.bunching {
            g += c * (-t / tau_i).exp();
        }
        g
    }

    fn to_log_params(&self) -> Vec<f64> {
        let mut p = vec![
            self.antibunching_amplitude.max(1e-12).ln(),
            self.antibunching_timescale.ln(),
        ];
        for &(c, tau) in &self.bunching {
            p.push(c.max(1e-12).ln());
            p.push(tau.ln());
        }
        p
    }

    fn from_log_params(params: &[f64]) -> Self {
        let bunching = params[2..]
            .chunks_exact(2)
            .map(|w| (w[0].exp(), w[1].exp()))
            .collect();
        let mut model = Self {
            antibunching_amplitude: params[0].exp(),
            antibunching_timescale: params[1].exp(),
            bunching,
        };
        model.bunching.sort_by(|a, b| a.1.total_cmp(&b.1));
        model
    }
}

/// Correlation data prepared for fitting: delays, g² values, and the
/// symmetrized per-bin uncertainties used as weights.
#[derive(Debug, Clone)]
pub struct G2Data {
    tau: Vec<f64>,
    g2: Vec<f64>,
    sigma: Vec<f64>,
}

impl G2Data {
    pub fn new(tau: Vec<f64>, g2: Vec<f64>, sigma: Vec<f64>) -> Result<Self, FittingError> {
        if tau.len() != g2.len() || tau.len() != sigma.len() {
            return Err(FittingError::BadData("column lengths differ".into()));
        }
        if tau.is_empty() {
            return Err(FittingError::BadData("no data points".into()));
        }
        if sigma.iter().any(|&s| !(s > 0.0)) {
            return Err(FittingError::BadData(
                "uncertainties must be positive".into(),
            ));
        }
        Ok(Self { tau, g2, sigma })
    }

    /// Extracts fit data from a correlation result, weighting each bin by
    /// `(err_plus + err_minus) / 2`.
    pub fn from_correlation(result: &CorrelationResult) -> Result<Self, FittingError> {
        let sigma: Vec<f64> = result
            .err_plus()
            .iter()
            .zip(result.err_minus())
            .map(|(&p, &m)| 0.5 * (p + m))
            .collect();
        Self::new(result.tau_centers(), result.g2().to_vec(), sigma)
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn g2(&self) -> &[f64] {
        &self.g2
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    fn uniform_step(&self) -> Option<f64> {
        if self.tau.len() < 2 {
            return None;
        }
        let step = self.tau[1] - self.tau[0];
        if step <= 0.0 {
            return None;
        }
        let uniform = self
            .tau
            .windows(2)
            .all(|w| ((w[1] - w[0]) - step).abs() <= 1e-6 * step);
        uniform.then_some(step)
    }
}

/// Options controlling the deterministic multi-start optimization.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub seed: u64,
    pub n_starts: usize,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            seed: DEFAULT_FIT_SEED,
            n_starts: 5,
            max_iterations: 400,
        }
    }
}

/// A fitted empirical model with its statistics.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: EmpiricalModel,
    /// Covariance of `[C1, τ1, C2, τ2, ...]` in linear parameter space.
    pub covariance: DMatrix<f64>,
    /// Error-weighted residuals `(data - model) / σ`.
    pub residuals: Vec<f64>,
    pub chi2: f64,
    pub chi2_reduced: f64,
    pub n_points: usize,
    pub n_params: usize,
    pub log_likelihood: f64,
    pub aic: f64,
    pub converged: bool,
    pub warnings: Vec<FitWarning>,
}

impl FitResult {
    /// One-sigma errors of `[C1, τ1, C2, τ2, ...]`.
    pub fn parameter_errors(&self) -> Vec<f64> {
        (0..self.covariance.nrows())
            .map(|k| self.covariance[(k, k)].max(0.0).sqrt())
            .collect()
    }

    /// Linear parameters in the covariance ordering.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = vec![
            self.model.antibunching_amplitude(),
            self.model.antibunching_timescale(),
        ];
        for &(c, tau) in self.model.bunching() {
            p.push(c);
            p.push(tau);
        }
        p
    }
}

/// Gaussian log-likelihood of weighted residuals and the corresponding
/// `AIC = 2p - 2 ln L`. A vanishing residual sum yields the `-inf`
/// overfit sentinel.
pub fn aic_from_residuals(residuals: &[f64], n_params: usize) -> (f64, f64) {
    let n = residuals.len() as f64;
    let sum_sq: f64 = residuals.iter().map(|&r| r * r).sum();
    if sum_sq <= 0.0 {
        return (f64::INFINITY, f64::NEG_INFINITY);
    }
    let log_likelihood =
        -0.5 * n * ((2.0 * std::f64::consts::PI).ln() + 1.0 - n.ln() + sum_sq.ln());
    (log_likelihood, 2.0 * n_params as f64 - 2.0 * log_likelihood)
}

/// The AIC of a fit, recomputed from its stored residuals.
pub fn aic(fit: &FitResult) -> f64 {
    aic_from_residuals(&fit.residuals, fit.n_params).1
}

struct FitProblem<'a> {
    data: &'a G2Data,
    n_bunching: usize,
    /// IRF kernel as (weight, time-offset) pairs; empty means no IRF.
    kernel: Vec<(f64, f64)>,
}

impl FitProblem<'_> {
    fn model_value(&self, params: &[f64], tau: f64) -> f64 {
        let c1 = params[0].exp();
        let tau1 = params[1].exp();
        let t = tau.abs();
        let mut g = 1.0 - c1 * (-t / tau1).exp();
        for k in 0..self.n_bunching {
            let c = params[2 + 2 * k].exp();
            let ti = params[3 + 2 * k].exp();
            g += c * (-t / ti).exp();
        }
        g
    }

    /// d model / d log-params at a single delay.
    fn model_gradient(&self, params: &[f64], tau: f64, grad: &mut [f64]) {
        let c1 = params[0].exp();
        let tau1 = params[1].exp();
        let t = tau.abs();
        let e1 = (-t / tau1).exp();
        grad[0] = -c1 * e1;
        grad[1] = -c1 * e1 * t / tau1;
        for k in 0..self.n_bunching {
            let c = params[2 + 2 * k].exp();
            let ti = params[3 + 2 * k].exp();
            let e = (-t / ti).exp();
            grad[2 + 2 * k] = c * e;
            grad[3 + 2 * k] = c * e * t / ti;
        }
    }
}

impl Residuals for FitProblem<'_> {
    fn n_residuals(&self) -> usize {
        self.data.len()
    }

    fn eval(&self, params: &[f64], r: &mut DVector<f64>, j: &mut DMatrix<f64>) -> bool {
        if params.iter().any(|&p| !p.is_finite() || p.abs() > 600.0) {
            return false;
        }
        let n_par = params.len();
        let mut grad = vec![0.0; n_par];
        let mut grad_shift = vec![0.0; n_par];
        for (i, ((&tau, &y), &sigma)) in self
            .data
            .tau
            .iter()
            .zip(&self.data.g2)
            .zip(&self.data.sigma)
            .enumerate()
        {
            let (value, gradient): (f64, &[f64]) = if self.kernel.is_empty() {
                self.model_gradient(params, tau, &mut grad);
                (self.model_value(params, tau), &grad)
            } else {
                // Convolution with the sampled IRF: the model is analytic,
                // so the kernel sum is evaluated exactly at shifted delays.
                let mut value = 0.0;
                grad.fill(0.0);
                for &(w, t_k) in &self.kernel {
                    let shifted = tau - t_k;
                    value += w * self.model_value(params, shifted);
                    self.model_gradient(params, shifted, &mut grad_shift);
                    for (g, &gs) in grad.iter_mut().zip(&grad_shift) {
                        *g += w * gs;
                    }
                }
                (value, &grad)
            };
            r[i] = (value - y) / sigma;
            for (k, &g) in gradient.iter().enumerate() {
                j[(i, k)] = g / sigma;
            }
        }
        true
    }
}

/// Heuristic starting model when the caller supplies no guess: the
/// antibunching depth comes from the shortest sampled delay, its
/// timescale from the first crossing of `1 - C1/2`, and bunching
/// timescales are log-spaced over the region beyond.
fn default_init(data: &G2Data, n_bunching: usize) -> EmpiricalModel {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| data.tau[a].abs().total_cmp(&data.tau[b].abs()));

    let g_near = data.g2[order[0]];
    let c1 = (1.0 - g_near).clamp(0.05, 3.0);
    let threshold = 1.0 - 0.5 * c1;
    let tau_max = data
        .tau
        .iter()
        .fold(0.0f64, |m, &t| m.max(t.abs()))
        .max(1e-12);
    let tau1 = order
        .iter()
        .find(|&&i| data.g2[i] >= threshold && data.tau[i].abs() > 0.0)
        .map(|&i| data.tau[i].abs())
        .unwrap_or(0.01 * tau_max);

    let excess = data.g2.iter().fold(0.0f64, |m, &g| m.max(g - 1.0));
    let c_each = (excess.max(0.05)) / n_bunching.max(1) as f64;
    let lo = (5.0 * tau1).min(tau_max / 10.0);
    let hi = tau_max / 2.0;
    let bunching = (0..n_bunching)
        .map(|k| {
            let f = (k as f64 + 0.5) / n_bunching as f64;
            (c_each, lo * (hi / lo).max(1.001).powf(f))
        })
        .collect();
    EmpiricalModel {
        antibunching_amplitude: c1,
        antibunching_timescale: tau1,
        bunching,
    }
}

fn build_result(data: &G2Data, problem: &FitProblem<'_>, outcome: levmar::LmOutcome) -> FitResult {
    let model = EmpiricalModel::from_log_params(&outcome.params);
    let n_points = data.len();
    let n_params = outcome.params.len();

    let mut residuals = DVector::zeros(n_points);
    let mut jacobian = DMatrix::zeros(n_points, n_params);
    problem.eval(&outcome.params, &mut residuals, &mut jacobian);
    let chi2 = residuals.norm_squared();
    let dof = (n_points.saturating_sub(n_params)).max(1) as f64;

    // Delta method: cov_linear = D cov_log D with D = diag(parameters).
    let cov_log =
        levmar::covariance(&outcome.jtj).unwrap_or_else(|| DMatrix::zeros(n_params, n_params));
    let lin: Vec<f64> = outcome.params.iter().map(|&p| p.exp()).collect();
    let d = DMatrix::from_diagonal(&DVector::from_vec(lin));
    let covariance = &d * cov_log * &d;

    let residuals_vec: Vec<f64> = residuals.iter().copied().collect();
    let (log_likelihood, aic) = aic_from_residuals(&residuals_vec, n_params);

    let mut warnings = Vec::new();
    if !aic.is_finite() {
        warnings.push(FitWarning::Overfit);
    }
    let tau_max = data.tau.iter().fold(0.0f64, |m, &t| m.max(t.abs()));
    for tau in model.timescales() {
        if tau > 50.0 * tau_max {
            warnings.push(FitWarning::TimescaleAtBound { tau });
        }
    }
    for &(c, _) in model.bunching() {
        if c < 1e-8 {
            warnings.push(FitWarning::VanishingAmplitude { amplitude: c });
        }
    }

    FitResult {
        model,
        covariance,
        residuals: residuals_vec,
        chi2,
        chi2_reduced: chi2 / dof,
        n_points,
        n_params,
        log_likelihood,
        aic,
        converged: outcome.converged,
        warnings,
    }
}

/// Fits the n-level empirical model to correlation data by weighted
/// nonlinear least squares.
///
/// With an IRF the objective compares the data against the convolution of
/// the model with the response histogram; the data must then sit on a
/// uniform grid matching the IRF bin width. Deterministic for a given
/// seed: multi-start jitter comes from a fixed-seed generator.
pub fn fit(
    data: &G2Data,
    n_levels: usize,
    irf: Option<&IrfHistogram>,
    init: Option<&EmpiricalModel>,
) -> Result<FitResult, FittingError> {
    fit_with(data, n_levels, irf, init, &FitOptions::default())
}

pub fn fit_with(
    data: &G2Data,
    n_levels: usize,
    irf: Option<&IrfHistogram>,
    init: Option<&EmpiricalModel>,
    options: &FitOptions,
) -> Result<FitResult, FittingError> {
    if n_levels < 2 {
        return Err(FittingError::BadModel(format!(
            "n = {n_levels} must be >= 2"
        )));
    }
    let n_params = 2 * (n_levels - 1);
    if data.len() < n_params + 2 {
        return Err(FittingError::TooFewBins {
            needed: n_params + 2,
            params: n_params,
            got: data.len(),
        });
    }
    let kernel = match irf {
        Some(irf) => {
            let step = data.uniform_step().ok_or_else(|| {
                FittingError::Grid("IRF fitting needs data on a uniform delay grid".into())
            })?;
            if ((irf.bin_width() - step) / step).abs() > 1e-6 {
                return Err(FittingError::Grid(format!(
                    "data step {step} does not match IRF bin width {}",
                    irf.bin_width()
                )));
            }
            irf.weights()
                .iter()
                .zip(irf.times())
                .filter(|&(&w, _)| w > 0.0)
                .map(|(&w, &t)| (w, t))
                .collect()
        }
        None => Vec::new(),
    };
    let n_bunching = n_levels - 2;
    let problem = FitProblem {
        data,
        n_bunching,
        kernel,
    };

    let base = match init {
        Some(m) => {
            if m.n_levels() != n_levels {
                return Err(FittingError::BadModel(format!(
                    "initial guess has n = {} but the fit asked for n = {n_levels}",
                    m.n_levels()
                )));
            }
            m.clone()
        }
        None => default_init(data, n_bunching),
    };

    // One start from the plain init plus seeded jittered variants.
    let mut starts = vec![base.to_log_params()];
    let mut rng = ChaCha12Rng::seed_from_u64(options.seed);
    for _ in 1..options.n_starts.max(1) {
        let jittered: Vec<f64> = base
            .to_log_params()
            .iter()
            .map(|&p| {
                let u: f64 = rng.random();
                p + 0.7 * (u - 0.5)
            })
            .collect();
        starts.push(jittered);
    }

    let lm_options = LmOptions {
        max_iterations: options.max_iterations,
        ..LmOptions::default()
    };
    let outcomes: Vec<levmar::LmOutcome> = starts
        .par_iter()
        .map(|start| levmar::minimize(&problem, start, &lm_options))
        .collect();

    let best = outcomes
        .into_iter()
        .enumerate()
        .filter(|(_, o)| o.chi2.is_finite())
        .min_by(|(ia, a), (ib, b)| a.chi2.total_cmp(&b.chi2).then(ia.cmp(ib)))
        .map(|(_, o)| o);
    let Some(best) = best else {
        return Err(FittingError::AllStartsFailed {
            starts: starts.len(),
        });
    };
    if !best.converged {
        // The error carries the best attempt so callers can inspect it.
        let result = build_result(data, &problem, best);
        return Err(FittingError::NoConvergence {
            starts: starts.len(),
            chi2: result.chi2,
            best: Box::new(result),
        });
    }
    Ok(build_result(data, &problem, best))
}

/// Fits a sweep of level counts over the same data.
///
/// Each higher-n fit additionally starts from the previous best model
/// with one extra vanishing bunching term, so the optimal chi-square is
/// non-increasing in n.
pub fn fit_sweep(
    data: &G2Data,
    level_counts: &[usize],
    irf: Option<&IrfHistogram>,
) -> Result<Vec<FitResult>, FittingError> {
    fit_sweep_with(data, level_counts, irf, &FitOptions::default())
}

pub fn fit_sweep_with(
    data: &G2Data,
    level_counts: &[usize],
    irf: Option<&IrfHistogram>,
    options: &FitOptions,
) -> Result<Vec<FitResult>, FittingError> {
    // A stalled optimizer still yields a usable parameter point; within a
    // sweep the best attempt is kept rather than dropped.
    fn attempt(
        data: &G2Data,
        n: usize,
        irf: Option<&IrfHistogram>,
        init: Option<&EmpiricalModel>,
        options: &FitOptions,
    ) -> Result<FitResult, FittingError> {
        match fit_with(data, n, irf, init, options) {
            Ok(result) => Ok(result),
            Err(FittingError::NoConvergence { best, .. }) => Ok(*best),
            Err(other) => Err(other),
        }
    }

    let mut ns: Vec<usize> = level_counts.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let mut results: Vec<FitResult> = Vec::with_capacity(ns.len());
    for &n in &ns {
        let mut best = attempt(data, n, irf, None, options)?;
        if let Some(prev) = results.last() {
            if prev.model.n_levels() + 1 == n {
                let mut bunching = prev.model.bunching().to_vec();
                let tau_new = prev
                    .model
                    .timescales()
                    .last()
                    .copied()
                    .unwrap_or(prev.model.antibunching_timescale())
                    * 3.0;
                bunching.push((1e-6, tau_new));
                let seeded = EmpiricalModel::new(
                    prev.model.antibunching_amplitude().max(1e-6),
                    prev.model.antibunching_timescale(),
                    bunching,
                )?;
                if let Ok(refined) = attempt(data, n, irf, Some(&seeded), options) {
                    if refined.chi2 < best.chi2 {
                        best = refined;
                    }
                }
            }
        }
        results.push(best);
    }
    Ok(results)
}

/// A fit with its AIC-based relative likelihood within a comparison.
#[derive(Debug, Clone)]
pub struct RankedFit {
    pub fit: FitResult,
    pub relative_likelihood: f64,
}

/// Ranks fits of the same data by AIC (best first). Each entry carries
/// `exp((AIC_min - AIC_i)/2)`; reduced chi-square stays available on the
/// fits as a complementary measure.
pub fn compare_models(fits: Vec<FitResult>) -> Result<Vec<RankedFit>, FittingError> {
    if fits.is_empty() {
        return Err(FittingError::Empty);
    }
    let mut sorted = fits;
    sorted.sort_by(|a, b| a.aic.total_cmp(&b.aic));
    let best = sorted[0].aic;
    Ok(sorted
        .into_iter()
        .map(|fit| {
            let relative_likelihood = if fit.aic == best {
                1.0
            } else {
                (0.5 * (best - fit.aic)).exp()
            };
            RankedFit {
                fit,
                relative_likelihood,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const NS: f64 = 1e-9;
    const US: f64 = 1e-6;

    #[test]
    fn evaluate_perfect_spe_at_zero() {
        let m = EmpiricalModel::two_level(1.0, 10.0 * NS).unwrap();
        assert_eq!(m.evaluate(0.0), 0.0);
    }

    #[test]
    fn evaluate_three_level_asymptote() {
        // Eq-23 convention: C1 = 1 + C2 keeps g2(0) = 0; g2(inf) = 1.
        let c2 = 1.5;
        let m = EmpiricalModel::new(1.0 + c2, 10.0 * NS, vec![(c2, 1.0 * US)]).unwrap();
        assert!((m.evaluate(1.0) - 1.0).abs() < 1e-12);
        assert!(m.evaluate(0.0).abs() < 1e-12);
    }

    #[test]
    fn evaluate_at_one_timescale() {
        let m = EmpiricalModel::two_level(1.0, 10.0 * NS).unwrap();
        let expect = 1.0 - (-1.0f64).exp();
        assert!((m.evaluate(10.0 * NS) - expect).abs() < 1e-12);
        assert!(
            (m.evaluate(-10.0 * NS) - expect).abs() < 1e-12,
            "even in tau"
        );
    }

    #[test]
    fn evaluate_bounds() {
        let m = EmpiricalModel::new(2.5, 10.0 * NS, vec![(1.5, 1.0 * US)]).unwrap();
        for k in 0..200 {
            let tau = k as f64 * 20.0 * NS;
            let g = m.evaluate(tau);
            assert!(g >= 1.0 - 2.5 - 1e-12);
            assert!(g <= 1.0 + 1.5 + 1e-12);
        }
    }

    fn sample_model(model: &EmpiricalModel, taus: &[f64], sigma: f64) -> G2Data {
        let g2: Vec<f64> = taus.iter().map(|&t| model.evaluate(t)).collect();
        G2Data::new(taus.to_vec(), g2, vec![sigma; taus.len()]).unwrap()
    }

    fn log_taus(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
            .collect()
    }

    #[test]
    fn refit_recovers_three_level_parameters() {
        let truth = EmpiricalModel::new(2.5, 10.0 * NS, vec![(1.5, 1.0 * US)]).unwrap();
        let taus = log_taus(0.5 * NS, 20.0 * US, 120);
        let data = sample_model(&truth, &taus, 0.01);
        let result = fit(&data, 3, None, None).unwrap();
        assert!(result.converged);
        let m = &result.model;
        assert!(
            (m.antibunching_amplitude() / 2.5 - 1.0).abs() < 5e-3,
            "C1 {}",
            m.antibunching_amplitude()
        );
        assert!((m.antibunching_timescale() / (10.0 * NS) - 1.0).abs() < 5e-3);
        assert!((m.bunching()[0].0 / 1.5 - 1.0).abs() < 5e-3);
        assert!((m.bunching()[0].1 / US - 1.0).abs() < 5e-3);
    }

    #[test]
    fn flat_data_drives_antibunching_to_zero() {
        let taus: Vec<f64> = (1..80).map(|k| k as f64 * 5.0 * NS).collect();
        let data =
            G2Data::new(taus.clone(), vec![1.0; taus.len()], vec![0.02; taus.len()]).unwrap();
        let result = fit(&data, 2, None, None).unwrap();
        let c1 = result.model.antibunching_amplitude();
        let err_c1 = result.parameter_errors()[0];
        assert!(c1 < err_c1.max(1e-3), "C1 = {c1}, err = {err_c1}");
    }

    #[test]
    fn delta_irf_matches_plain_fit() {
        let truth = EmpiricalModel::new(1.0, 20.0 * NS, vec![]).unwrap();
        let taus: Vec<f64> = (-150..=150).map(|k| k as f64 * 2.0 * NS).collect();
        let data = sample_model(&truth, &taus, 0.01);
        let plain = fit(&data, 2, None, None).unwrap();
        let delta = IrfHistogram::delta(2.0 * NS);
        let with_irf = fit(&data, 2, Some(&delta), None).unwrap();
        let a = plain.model.antibunching_timescale();
        let b = with_irf.model.antibunching_timescale();
        assert!((a / b - 1.0).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn irf_fit_recovers_true_timescales_through_jitter() {
        // Forward-convolve a short-timescale model with a gaussian IRF,
        // then fit through the same IRF: true parameters come back.
        let truth = EmpiricalModel::new(2.5, 5.0 * NS, vec![(1.5, 150.0 * NS)]).unwrap();
        let sigma_irf = 2.0 * NS;
        let step = 1.0 * NS;
        let irf = IrfHistogram::gaussian(sigma_irf, step).unwrap();
        let taus: Vec<f64> = (-400..=400).map(|k| k as f64 * step).collect();
        let blurred: Vec<f64> = taus
            .iter()
            .map(|&t| {
                irf.weights()
                    .iter()
                    .zip(irf.times())
                    .map(|(&w, &tk)| w * truth.evaluate(t - tk))
                    .sum()
            })
            .collect();
        let data = G2Data::new(taus, blurred, vec![0.01; 801]).unwrap();
        let result = fit(&data, 3, Some(&irf), None).unwrap();
        let tau1 = result.model.antibunching_timescale();
        assert!((tau1 / (5.0 * NS) - 1.0).abs() < 0.01, "tau1 = {tau1}");
    }

    #[test]
    fn too_few_bins_rejected() {
        let data = G2Data::new(
            vec![1.0 * NS, 2.0 * NS, 3.0 * NS],
            vec![0.5, 0.8, 0.9],
            vec![0.1, 0.1, 0.1],
        )
        .unwrap();
        assert!(matches!(
            fit(&data, 3, None, None),
            Err(FittingError::TooFewBins { .. })
        ));
    }

    #[test]
    fn aic_definition_and_relative_likelihood() {
        // Equal ln L, p = 4 vs 6: delta AIC = 4, relative likelihood e^-2.
        let residuals = vec![0.5; 50];
        let (_, aic4) = aic_from_residuals(&residuals, 4);
        let (_, aic6) = aic_from_residuals(&residuals, 6);
        assert!((aic6 - aic4 - 4.0).abs() < 1e-12);
        let rel = (0.5 * (aic4 - aic6)).exp();
        assert!((rel - (-2.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn aic_overfit_sentinel() {
        let (ll, aic) = aic_from_residuals(&[0.0; 10], 2);
        assert!(ll.is_infinite() && aic == f64::NEG_INFINITY);
    }

    #[test]
    fn aic_monotone_in_chi2_at_fixed_p() {
        let small = vec![0.1; 40];
        let large = vec![0.3; 40];
        assert!(aic_from_residuals(&small, 4).1 < aic_from_residuals(&large, 4).1);
    }

    #[test]
    fn compare_single_fit_is_unit_likelihood() {
        let truth = EmpiricalModel::two_level(1.0, 10.0 * NS).unwrap();
        let taus = log_taus(0.5 * NS, 1.0 * US, 60);
        let data = sample_model(&truth, &taus, 0.01);
        let f = fit(&data, 2, None, None).unwrap();
        let ranked = compare_models(vec![f]).unwrap();
        assert_eq!(ranked.len(), 1);
        assert_eq!(ranked[0].relative_likelihood, 1.0);
    }

    #[test]
    fn compare_handles_ties() {
        let truth = EmpiricalModel::two_level(1.0, 10.0 * NS).unwrap();
        let taus = log_taus(0.5 * NS, 1.0 * US, 60);
        let data = sample_model(&truth, &taus, 0.01);
        let f1 = fit(&data, 2, None, None).unwrap();
        let f2 = fit(&data, 2, None, None).unwrap();
        let ranked = compare_models(vec![f1, f2]).unwrap();
        assert_eq!(ranked[0].relative_likelihood, 1.0);
        assert!((ranked[1].relative_likelihood - 1.0).abs() < 1e-9);
    }

    #[test]
    fn compare_empty_is_error() {
        assert!(matches!(
            compare_models(Vec::new()),
            Err(FittingError::Empty)
        ));
    }

    #[test]
    fn sweep_prefers_two_level_on_two_level_data() {
        // Small deterministic noise keeps the AIC comparison meaningful
        // (exactly noiseless data drives ln(sum x^2) to the sentinel).
        let truth = EmpiricalModel::two_level(1.0, 10.0 * NS).unwrap();
        let taus = log_taus(0.5 * NS, 5.0 * US, 100);
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let sigma = 0.01;
        let g2: Vec<f64> = taus
            .iter()
            .map(|&t| {
                let u: f64 = rng.random::<f64>() + rng.random::<f64>() + rng.random::<f64>() - 1.5;
                truth.evaluate(t) + sigma * u
            })
            .collect();
        let data = G2Data::new(taus, g2, vec![sigma; 100]).unwrap();
        let fits = fit_sweep(&data, &[2, 3, 4], None).unwrap();
        // chi2 never increases with added parameters.
        for w in fits.windows(2) {
            assert!(
                w[1].chi2 <= w[0].chi2 * (1.0 + 1e-9),
                "{} vs {}",
                w[1].chi2,
                w[0].chi2
            );
        }
        let ranked = compare_models(fits).unwrap();
        assert_eq!(ranked[0].fit.model.n_levels(), 2);
        for r in &ranked {
            assert!(r.relative_likelihood <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn estimator_consistency_with_photon_count() {
        // Errors shrink as the synthetic photon budget grows 100x.
        let truth = EmpiricalModel::new(1.0, 10.0 * NS, vec![]).unwrap();
        let taus = log_taus(0.5 * NS, 1.0 * US, 80);
        let mut med = Vec::new();
        for &scale in &[1.0f64, 100.0] {
            let sigma = 0.05 / scale.sqrt();
            let mut errs = Vec::new();
            for seed in 0..20 {
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                let g2: Vec<f64> = taus
                    .iter()
                    .map(|&t| {
                        let u: f64 =
                            rng.random::<f64>() + rng.random::<f64>() + rng.random::<f64>() - 1.5;
                        truth.evaluate(t) + sigma * u
                    })
                    .collect();
                let data = G2Data::new(taus.clone(), g2, vec![sigma; taus.len()]).unwrap();
                let f = fit(&data, 2, None, None).unwrap();
                errs.push((f.model.antibunching_timescale() / (10.0 * NS) - 1.0).abs());
            }
            errs.sort_by(f64::total_cmp);
            med.push(errs[errs.len() / 2]);
        }
        assert!(med[1] < med[0], "median error did not shrink: {med:?}");
    }
}
