//! Damped least-squares (Levenberg-Marquardt) minimizer for small dense
//! problems. Deterministic: no randomness, fixed iteration budget.

use nalgebra::{DMatrix, DVector};

pub(crate) struct LmOptions {
    pub max_iterations: usize,
    /// Relative chi-square decrease below which a step counts as converged.
    pub chi2_rel_tol: f64,
    /// Infinity norm of the gradient below which the fit stops.
    pub gradient_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 400,
            chi2_rel_tol: 1e-14,
            gradient_tol: 1e-14,
        }
    }
}

pub(crate) struct LmOutcome {
    pub params: Vec<f64>,
    pub chi2: f64,
    pub converged: bool,
    /// J^T J at the solution, for covariance estimates.
    pub jtj: DMatrix<f64>,
}

/// A residual model: fills `r` with weighted residuals and `j` with the
/// Jacobian `dr_i/dp_k` at `params`. Returns `false` for invalid parameter
/// points (the step is rejected).
pub(crate) trait Residuals {
    fn n_residuals(&self) -> usize;
    fn eval(&self, params: &[f64], r: &mut DVector<f64>, j: &mut DMatrix<f64>) -> bool;
}

pub(crate) fn minimize(model: &dyn Residuals, initial: &[f64], options: &LmOptions) -> LmOutcome {
    let n_par = initial.len();
    let n_res = model.n_residuals();
    let mut params = DVector::from_column_slice(initial);
    let mut residuals = DVector::zeros(n_res);
    let mut jacobian = DMatrix::zeros(n_res, n_par);

    if !model.eval(params.as_slice(), &mut residuals, &mut jacobian) {
        return LmOutcome {
            params: initial.to_vec(),
            chi2: f64::INFINITY,
            converged: false,
            jtj: DMatrix::zeros(n_par, n_par),
        };
    }
    let mut chi2 = residuals.norm_squared();
    let mut jtj = jacobian.transpose() * &jacobian;
    let mut gradient = jacobian.transpose() * &residuals;

    let mut lambda = 1e-3
        * (0..n_par)
            .map(|k| jtj[(k, k)])
            .fold(0.0f64, f64::max)
            .max(1e-300);
    let mut converged = false;
    let mut stalled = 0usize;

    for _ in 0..options.max_iterations {
        if gradient.amax() < options.gradient_tol {
            converged = true;
            break;
        }

        let mut damped = jtj.clone();
        for k in 0..n_par {
            damped[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
        }
        let Some(step) = damped.lu().solve(&gradient) else {
            lambda *= 10.0;
            continue;
        };
        let trial = &params - &step;

        let mut trial_residuals = DVector::zeros(n_res);
        let mut trial_jacobian = DMatrix::zeros(n_res, n_par);
        let ok = model.eval(trial.as_slice(), &mut trial_residuals, &mut trial_jacobian);
        let trial_chi2 = if ok {
            trial_residuals.norm_squared()
        } else {
            f64::INFINITY
        };

        if trial_chi2.is_finite() && trial_chi2 <= chi2 {
            let improvement = (chi2 - trial_chi2) / chi2.max(1e-300);
            params = trial;
            residuals = trial_residuals;
            jacobian = trial_jacobian;
            chi2 = trial_chi2;
            jtj = jacobian.transpose() * &jacobian;
            gradient = jacobian.transpose() * &residuals;
            lambda = (lambda * 0.33).max(1e-14);
            if improvement < options.chi2_rel_tol {
                stalled += 1;
                if stalled >= 3 {
                    converged = true;
                    break;
                }
            } else {
                stalled = 0;
            }
        } else {
            lambda *= 8.0;
            if lambda > 1e14 {
                converged = chi2.is_finite();
                break;
            }
        }
    }

    LmOutcome {
        params: params.as_slice().to_vec(),
        chi2,
        converged,
        jtj,
    }
}

/// Covariance of the parameters at the optimum: `(J^T J)^{-1}` scaled is
/// left to the caller (residuals are already error-weighted here).
pub(crate) fn covariance(jtj: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    jtj.clone().try_inverse()
}

#[cfg(test)]
mod tests {
    use super::*;

    struct ExpDecay {
        t: Vec<f64>,
        y: Vec<f64>,
    }

    impl Residuals for ExpDecay {
        fn n_residuals(&self) -> usize {
            self.t.len()
        }
        fn eval(&self, p: &[f64], r: &mut DVector<f64>, j: &mut DMatrix<f64>) -> bool {
            let (a, k) = (p[0], p[1]);
            for (i, (&t, &y)) in self.t.iter().zip(&self.y).enumerate() {
                let e = (-k * t).exp();
                r[i] = a * e - y;
                j[(i, 0)] = e;
                j[(i, 1)] = -a * t * e;
            }
            true
        }
    }

    #[test]
    fn recovers_exponential_parameters() {
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|&t| 3.5 * (-0.8 * t).exp()).collect();
        let model = ExpDecay { t, y };
        let out = minimize(&model, &[1.0, 0.2], &LmOptions::default());
        assert!(out.converged);
        assert!((out.params[0] - 3.5).abs() < 1e-8, "a = {}", out.params[0]);
        assert!((out.params[1] - 0.8).abs() < 1e-8, "k = {}", out.params[1]);
        assert!(out.chi2 < 1e-16);
    }
}
