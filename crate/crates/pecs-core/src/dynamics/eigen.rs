//! Eigenrate decomposition of the master equation.
//!
//! The general solution is `P(t) = A_0 v_0 + Σ A_i e^{λ_i t} v_i` with
//! `λ_0 = 0` carrying the steady state, all other `Re(λ_i) < 0`, and
//! complex eigenvalues in conjugate pairs. Eigenvalues come from the real
//! Schur form; eigenvectors from shifted inverse iteration, which is
//! accurate for the small, well-separated spectra of physical rate
//! models. A defective (or numerically near-defective) generator is
//! reported so callers can fall back to direct integration.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::{DynamicsError, RateModel};

type C64 = Complex<f64>;

/// Spectral decomposition of a generator with coefficients fixed by an
/// initial condition.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    eigenvalues: Vec<C64>,
    /// Eigenvectors as matrix columns, same order as the eigenvalues.
    eigenvectors: DMatrix<C64>,
    /// Expansion coefficients `A_i` of the initial condition.
    coefficients: Vec<C64>,
    zero_index: usize,
}

impl EigenDecomposition {
    /// Decomposes the generator and solves `V A = P(0)`.
    pub fn compute(model: &RateModel, p0: &DVector<f64>) -> Result<Self, DynamicsError> {
        let g = model.generator();
        let n = model.n_levels();
        let scale = (0..n)
            .map(|j| g[(j, j)].abs())
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);

        let mut eigenvalues: Vec<C64> = g.clone().complex_eigenvalues().iter().copied().collect();
        // Deterministic order: by real part descending, then imaginary.
        eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));

        let zero_tol = 1e-9 * scale;
        let zero_count = eigenvalues.iter().filter(|l| l.norm() < zero_tol).count();
        if zero_count != 1 {
            return Err(DynamicsError::Defective(format!(
                "{zero_count} eigenvalues within {zero_tol:.3e} of zero (expected exactly 1)"
            )));
        }
        let zero_index = eigenvalues
            .iter()
            .position(|l| l.norm() < zero_tol)
            .expect("zero eigenvalue");
        eigenvalues[zero_index] = C64::new(0.0, 0.0);
        if eigenvalues.iter().any(|l| l.re > zero_tol) {
            return Err(DynamicsError::Defective(
                "positive-real-part eigenvalue in a probability-conserving generator".into(),
            ));
        }

        let gc = g.map(|x| C64::new(x, 0.0));
        let mut eigenvectors = DMatrix::<C64>::zeros(n, n);
        let mut rng = ChaCha12Rng::seed_from_u64(0xE16E);
        for (k, &lambda) in eigenvalues.iter().enumerate() {
            // Conjugate pairs share conjugated eigenvectors.
            if lambda.im > 0.0 {
                if let Some(partner) = eigenvalues[..k]
                    .iter()
                    .position(|l| (l.conj() - lambda).norm() < 1e-9 * scale)
                {
                    let conj = eigenvectors.column(partner).map(|x| x.conj());
                    eigenvectors.set_column(k, &conj);
                    continue;
                }
            }
            let v = inverse_iteration(&gc, lambda, scale, &mut rng)?;
            eigenvectors.set_column(k, &v);
        }

        let p0c = DVector::from_fn(n, |i, _| C64::new(p0[i], 0.0));
        let lu = eigenvectors.clone().lu();
        let coefficients = lu
            .solve(&p0c)
            .ok_or_else(|| DynamicsError::Defective("eigenvector matrix is singular".into()))?;

        // Residual check doubles as the defectiveness test: a deficient
        // eigenbasis cannot reproduce the initial condition.
        let residual = (&eigenvectors * &coefficients - &p0c).norm();
        if residual > 1e-8 {
            return Err(DynamicsError::Defective(format!(
                "initial-condition expansion residual {residual:.3e}"
            )));
        }

        Ok(Self {
            eigenvalues,
            eigenvectors,
            coefficients: coefficients.iter().copied().collect(),
            zero_index,
        })
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<C64> {
        &self.eigenvectors
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.coefficients
    }

    /// Relaxation timescales `τ_i = -1/Re(λ_i)` of the non-zero modes,
    /// ascending.
    pub fn timescales(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != self.zero_index)
            .map(|(_, l)| -1.0 / l.re)
            .collect();
        out.sort_by(f64::total_cmp);
        out
    }

    /// Population vector at time `t` from the spectral expansion.
    pub fn population(&self, t: f64) -> DVector<f64> {
        let n = self.eigenvectors.nrows();
        let mut p = DVector::<C64>::zeros(n);
        for (k, (&lambda, &a)) in self.eigenvalues.iter().zip(&self.coefficients).enumerate() {
            let phase = (lambda * C64::new(t, 0.0)).exp();
            let column = self.eigenvectors.column(k);
            for i in 0..n {
                p[i] += a * phase * column[i];
            }
        }
        DVector::from_fn(n, |i, _| p[i].re)
    }

    /// The `A_0 v_0` term: must equal the steady state.
    pub fn stationary_component(&self) -> DVector<f64> {
        let n = self.eigenvectors.nrows();
        let a = self.coefficients[self.zero_index];
        let v = self.eigenvectors.column(self.zero_index);
        DVector::from_fn(n, |i, _| (a * v[i]).re)
    }

    /// Amplitude of each mode in the detected-flux signal: the expansion
    /// of `w·P(t) / (w·P∞)` as `1 + Σ α_i e^{λ_i t}` returns the `α_i`
    /// keyed by eigenvalue (zero mode excluded).
    pub fn signal_mode_amplitudes(&self, weights: &DVector<f64>) -> Vec<(C64, C64)> {
        let wc = DVector::from_fn(weights.len(), |i, _| C64::new(weights[i], 0.0));
        let norm: C64 = {
            let a = self.coefficients[self.zero_index];
            let v = self.eigenvectors.column(self.zero_index);
            a * v.dotc(&wc).conj()
        };
        self.eigenvalues
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != self.zero_index)
            .map(|(k, &lambda)| {
                let overlap = self.eigenvectors.column(k).dotc(&wc).conj();
                (lambda, self.coefficients[k] * overlap / norm)
            })
            .collect()
    }
}

/// Shifted inverse iteration for the eigenvector of `lambda`.
fn inverse_iteration(
    gc: &DMatrix<C64>,
    lambda: C64,
    scale: f64,
    rng: &mut ChaCha12Rng,
) -> Result<DVector<C64>, DynamicsError> {
    let n = gc.nrows();
    // A slight complex shift keeps the system solvable at the exact
    // eigenvalue; distinct random starts separate degenerate eigenspaces.
    let shift = lambda + C64::new(1e-9 * scale, 3e-10 * scale);
    let mut shifted = gc.clone();
    for i in 0..n {
        shifted[(i, i)] -= shift;
    }
    let lu = shifted.lu();
    let mut v = DVector::from_fn(n, |_, _| {
        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    v /= C64::new(v.norm(), 0.0);
    for _ in 0..4 {
        let next = lu
            .solve(&v)
            .ok_or_else(|| DynamicsError::Defective("singular shifted generator".into()))?;
        let norm = next.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(DynamicsError::Defective(
                "inverse iteration diverged".into(),
            ));
        }
        v = next / C64::new(norm, 0.0);
    }
    // Polish with a residual check against the unshifted matrix.
    let residual = (gc * &v - &v * lambda).norm();
    if residual > 1e-6 * scale {
        return Err(DynamicsError::Defective(format!(
            "eigenvector residual {residual:.3e} at eigenvalue {lambda}"
        )));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{initial_condition, steady_state};

    const MHZ: f64 = 1e6;

    #[test]
    fn two_level_nonzero_eigenvalue_is_total_rate() {
        let m = RateModel::two_level(25.0 * MHZ, 50.0 * MHZ, 1.0).unwrap();
        let p0 = initial_condition(&m).unwrap();
        let eig = EigenDecomposition::compute(&m, &p0).unwrap();
        let taus = eig.timescales();
        assert_eq!(taus.len(), 1);
        let expect = 1.0 / (75.0 * MHZ);
        assert!((taus[0] / expect - 1.0).abs() < 1e-10, "tau = {}", taus[0]);
    }

    #[test]
    fn spectrum_structure_zero_and_negatives() {
        let m = RateModel::from_rates(
            3,
            &[
                (1, 0, 50.0 * MHZ),
                (0, 1, 50.0 * MHZ),
                (2, 1, 5.0 * MHZ),
                (0, 2, 2.5 * MHZ),
            ],
            &[(0, 1, 1.0)],
        )
        .unwrap();
        let p0 = initial_condition(&m).unwrap();
        let eig = EigenDecomposition::compute(&m, &p0).unwrap();
        let zero_count = eig.eigenvalues().iter().filter(|l| l.norm() == 0.0).count();
        assert_eq!(zero_count, 1);
        for l in eig.eigenvalues() {
            assert!(l.re <= 1e-3, "Re(lambda) = {}", l.re);
        }
    }

    #[test]
    fn stationary_component_matches_steady_state() {
        let m = RateModel::from_rates(
            3,
            &[
                (1, 0, 50.0 * MHZ),
                (0, 1, 50.0 * MHZ),
                (2, 1, 5.0 * MHZ),
                (0, 2, 2.5 * MHZ),
            ],
            &[(0, 1, 1.0)],
        )
        .unwrap();
        let p0 = initial_condition(&m).unwrap();
        let eig = EigenDecomposition::compute(&m, &p0).unwrap();
        let stationary = eig.stationary_component();
        let steady = steady_state(&m).unwrap();
        assert!((stationary - steady).amax() < 1e-10);
    }

    #[test]
    fn population_starts_at_initial_condition_and_relaxes() {
        let m = RateModel::two_level(40.0 * MHZ, 60.0 * MHZ, 1.0).unwrap();
        let p0 = initial_condition(&m).unwrap();
        let eig = EigenDecomposition::compute(&m, &p0).unwrap();
        assert!((eig.population(0.0) - &p0).amax() < 1e-12);
        let late = eig.population(1e-6);
        let steady = steady_state(&m).unwrap();
        assert!((late - steady).amax() < 1e-12);
    }
}
