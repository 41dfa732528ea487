//! n-level rate models of quantum-emitter optical dynamics.
//!
//! A model is a generator matrix `G` for the population master equation
//! `dP/dt = G P` (off-diagonal `G_ij` is the rate from state `j` into
//! state `i`, diagonals conserve probability) plus a collection matrix
//! `C` whose entries give the probability of detecting a photon on each
//! transition. From these the module computes steady states, eigenrate
//! decompositions, time-dependent populations, simulated g²(τ), and
//! Gillespie photon streams; templates build the spin- and
//! power-dependent models used for hypothesis testing.

mod eigen;
mod gillespie;
mod ode;
mod simulate;
mod spin;
mod templates;

pub use eigen::EigenDecomposition;
pub use gillespie::{apply_dead_time, generate_photon_stream, inject_dark_counts};
pub use ode::integrate_master_equation;
pub use simulate::{default_time_grid, simulate_g2, DynamicsWarning, SimulationResult};
pub use spin::{
    optical_overlap_weights, overlap_weights, spin_eigenbasis, spin_hamiltonian_mhz, spin_mixing,
    SpinManifold, SpinParams, BOHR_MAGNETON_MHZ_PER_G,
};
pub use templates::{build_model, model_from_file, model_from_json, ModelFile, ModelTemplate};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("invalid rate model: {0}")]
    BadModel(String),
    #[error("reducible model: states {unreachable:?} do not communicate with state 0")]
    Reducible { unreachable: Vec<usize> },
    #[error("model has no radiative transitions (C is all zero)")]
    AllDark,
    #[error("defective generator: {0}")]
    Defective(String),
    #[error("ODE solver failed: {0}")]
    Solver(String),
    #[error("solution unstable: {0}")]
    Stability(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("simulation size guard: {0}")]
    Size(String),
    #[error("model file error: {0}")]
    File(String),
}

/// An n-level rate model: generator matrix `G` (per-second rates) and
/// transition collection-efficiency matrix `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateModel {
    generator: DMatrix<f64>,
    collection: DMatrix<f64>,
}

impl RateModel {
    /// Validates and normalizes a model.
    ///
    /// Off-diagonal generator entries must be non-negative; diagonals are
    /// snapped to minus the column sum of the off-diagonals (they must
    /// already agree to a relative 1e-6). Collection entries live in
    /// [0, 1] and may only sit on transitions with a positive rate. The
    /// transition graph must be strongly connected.
    pub fn new(
        mut generator: DMatrix<f64>,
        collection: DMatrix<f64>,
    ) -> Result<Self, DynamicsError> {
        let n = generator.nrows();
        if n < 2 || generator.ncols() != n {
            return Err(DynamicsError::BadModel(format!(
                "generator must be square with n >= 2, got {}x{}",
                generator.nrows(),
                generator.ncols()
            )));
        }
        if collection.nrows() != n || collection.ncols() != n {
            return Err(DynamicsError::BadModel(
                "collection matrix shape does not match the generator".into(),
            ));
        }
        let mut scale = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                let g = generator[(i, j)];
                if !g.is_finite() {
                    return Err(DynamicsError::BadModel(format!("G[{i}][{j}] = {g}")));
                }
                if i != j {
                    if g < 0.0 {
                        return Err(DynamicsError::BadModel(format!(
                            "off-diagonal rate G[{i}][{j}] = {g} is negative"
                        )));
                    }
                    scale = scale.max(g);
                }
            }
        }
        if scale == 0.0 {
            return Err(DynamicsError::BadModel(
                "all transition rates are zero".into(),
            ));
        }
        for j in 0..n {
            let off_sum: f64 = (0..n).filter(|&i| i != j).map(|i| generator[(i, j)]).sum();
            if (generator[(j, j)] + off_sum).abs() > 1e-6 * scale {
                return Err(DynamicsError::BadModel(format!(
                    "column {j} sums to {} instead of 0",
                    generator[(j, j)] + off_sum
                )));
            }
            generator[(j, j)] = -off_sum;
        }
        for j in 0..n {
            for i in 0..n {
                let c = collection[(i, j)];
                if !(0.0..=1.0).contains(&c) || !c.is_finite() {
                    return Err(DynamicsError::BadModel(format!(
                        "collection C[{i}][{j}] = {c} outside [0, 1]"
                    )));
                }
                if c > 0.0 && (i == j || generator[(i, j)] <= 0.0) {
                    return Err(DynamicsError::BadModel(format!(
                        "collection C[{i}][{j}] > 0 on a transition with no rate"
                    )));
                }
            }
        }

        let model = Self {
            generator,
            collection,
        };
        let unreachable = model.non_communicating_states();
        if !unreachable.is_empty() {
            return Err(DynamicsError::Reducible { unreachable });
        }
        Ok(model)
    }

    /// Builds a model from off-diagonal rates only; diagonals are filled
    /// in to conserve probability.
    pub fn from_rates(
        n: usize,
        rates: &[(usize, usize, f64)],
        radiative: &[(usize, usize, f64)],
    ) -> Result<Self, DynamicsError> {
        let mut g = DMatrix::zeros(n, n);
        for &(to, from, rate) in rates {
            if to >= n || from >= n || to == from {
                return Err(DynamicsError::BadModel(format!(
                    "bad transition {from} -> {to} for n = {n}"
                )));
            }
            g[(to, from)] += rate;
        }
        for j in 0..n {
            let off_sum: f64 = (0..n).filter(|&i| i != j).map(|i| g[(i, j)]).sum();
            g[(j, j)] = -off_sum;
        }
        let mut c = DMatrix::zeros(n, n);
        for &(to, from, efficiency) in radiative {
            c[(to, from)] = efficiency;
        }
        Self::new(g, c)
    }

    /// Two-level emitter: pump `g -> e` at `gamma_ge`, radiative decay
    /// `e -> g` at `gamma_eg` detected with probability
    /// `collection_efficiency`. State 0 is the ground state.
    pub fn two_level(
        gamma_ge: f64,
        gamma_eg: f64,
        collection_efficiency: f64,
    ) -> Result<Self, DynamicsError> {
        Self::from_rates(
            2,
            &[(1, 0, gamma_ge), (0, 1, gamma_eg)],
            &[(0, 1, collection_efficiency)],
        )
    }

    pub fn n_levels(&self) -> usize {
        self.generator.nrows()
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    pub fn collection(&self) -> &DMatrix<f64> {
        &self.collection
    }

    /// Detected-flux weights `w_j = Σ_i C_ij G_ij`: the detected photon
    /// rate out of state `j` per unit occupation.
    pub fn detection_weights(&self) -> DVector<f64> {
        let n = self.n_levels();
        DVector::from_fn(n, |j, _| {
            (0..n)
                .filter(|&i| i != j)
                .map(|i| self.collection[(i, j)] * self.generator[(i, j)])
                .sum()
        })
    }

    /// States that fail strong connectivity with state 0 (empty when the
    /// model is irreducible).
    fn non_communicating_states(&self) -> Vec<usize> {
        let n = self.n_levels();
        let reach = |transpose: bool| -> Vec<bool> {
            let mut seen = vec![false; n];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(j) = stack.pop() {
                for i in 0..n {
                    let rate = if transpose {
                        self.generator[(j, i)]
                    } else {
                        self.generator[(i, j)]
                    };
                    if i != j && rate > 0.0 && !seen[i] {
                        seen[i] = true;
                        stack.push(i);
                    }
                }
            }
            seen
        };
        let forward = reach(false);
        let backward = reach(true);
        (0..n).filter(|&i| !forward[i] || !backward[i]).collect()
    }
}

/// Steady-state occupation `P∞`: the null vector of `G`, normalized to
/// unit sum with non-negative entries.
pub fn steady_state(model: &RateModel) -> Result<DVector<f64>, DynamicsError> {
    let g = model.generator();
    let n = model.n_levels();
    let svd = g.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("svd requested v_t");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let scale = svd.singular_values[order[n - 1]].max(f64::MIN_POSITIVE);
    if n > 1 && svd.singular_values[order[1]] < 1e-10 * scale {
        return Err(DynamicsError::Reducible {
            unreachable: vec![],
        });
    }

    let mut p = DVector::from_fn(n, |i, _| v_t[(order[0], i)]);
    let sum: f64 = p.iter().sum();
    if sum.abs() < 1e-300 {
        return Err(DynamicsError::Defective("null vector has zero sum".into()));
    }
    p /= sum;
    for x in p.iter_mut() {
        if *x < 0.0 {
            if *x < -1e-9 {
                return Err(DynamicsError::Defective(format!(
                    "steady state has a negative component {x}"
                )));
            }
            *x = 0.0;
        }
    }
    let total: f64 = p.iter().sum();
    Ok(p / total)
}

/// State distribution immediately after a photon detection:
/// `P0_i = Σ_j C_ij G_ij P∞_j / Σ_ij C_ij G_ij P∞_j`.
///
/// For a single radiative transition this is a unit mass on its final
/// state.
pub fn initial_condition(model: &RateModel) -> Result<DVector<f64>, DynamicsError> {
    let steady = steady_state(model)?;
    initial_condition_from(model, &steady)
}

pub(crate) fn initial_condition_from(
    model: &RateModel,
    steady: &DVector<f64>,
) -> Result<DVector<f64>, DynamicsError> {
    let n = model.n_levels();
    let g = model.generator();
    let c = model.collection();
    let mut p0 = DVector::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p0[i] += c[(i, j)] * g[(i, j)] * steady[j];
            }
        }
    }
    let total: f64 = p0.iter().sum();
    if !(total > 0.0) {
        return Err(DynamicsError::AllDark);
    }
    Ok(p0 / total)
}

/// Zero-delay autocorrelation of `n` mutually incoherent emitters with
/// the given brightnesses: `((ΣI)² - ΣI²) / (ΣI)²`.
///
/// Equal brightnesses give `(n-1)/n`; any imbalance pulls the value
/// below that bound.
pub fn multi_emitter_g2_zero(intensities: &[f64]) -> Result<f64, DynamicsError> {
    if intensities.is_empty() {
        return Err(DynamicsError::BadModel(
            "no emitter intensities given".into(),
        ));
    }
    if intensities.iter().any(|&i| !(i > 0.0)) {
        return Err(DynamicsError::BadModel(
            "emitter intensities must be positive".into(),
        ));
    }
    let sum: f64 = intensities.iter().sum();
    let sum_sq: f64 = intensities.iter().map(|&i| i * i).sum();
    Ok((sum * sum - sum_sq) / (sum * sum))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MHZ: f64 = 1e6;

    #[test]
    fn two_level_columns_sum_to_zero() {
        let m = RateModel::two_level(25.0 * MHZ, 50.0 * MHZ, 1.0).unwrap();
        for j in 0..2 {
            let col: f64 = (0..2).map(|i| m.generator()[(i, j)]).sum();
            assert_eq!(col, 0.0);
        }
    }

    #[test]
    fn symmetric_two_level_steady_state() {
        let m = RateModel::two_level(50.0 * MHZ, 50.0 * MHZ, 1.0).unwrap();
        let p = steady_state(&m).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12);
        assert!((p[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn detailed_balance_two_level() {
        let m = RateModel::two_level(25.0 * MHZ, 50.0 * MHZ, 1.0).unwrap();
        let p = steady_state(&m).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12, "ground {}", p[0]);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-12, "excited {}", p[1]);
    }

    #[test]
    fn reducible_model_is_rejected() {
        // State 2 has inflow but no outflow back to the cycle.
        let mut g = DMatrix::zeros(3, 3);
        g[(1, 0)] = 1.0;
        g[(0, 1)] = 1.0;
        g[(2, 1)] = 0.5;
        for j in 0..3 {
            let off: f64 = (0..3).filter(|&i| i != j).map(|i| g[(i, j)]).sum();
            g[(j, j)] = -off;
        }
        let c = DMatrix::zeros(3, 3);
        assert!(matches!(
            RateModel::new(g, c),
            Err(DynamicsError::Reducible { .. })
        ));
    }

    #[test]
    fn collection_off_transition_is_rejected() {
        let mut g = DMatrix::zeros(2, 2);
        g[(1, 0)] = 1.0;
        g[(0, 1)] = 1.0;
        g[(0, 0)] = -1.0;
        g[(1, 1)] = -1.0;
        let mut c = DMatrix::zeros(2, 2);
        c[(1, 1)] = 0.5;
        assert!(RateModel::new(g.clone(), c).is_err());
        let mut c2 = DMatrix::zeros(2, 2);
        c2[(0, 1)] = 1.5;
        assert!(RateModel::new(g, c2).is_err());
    }

    #[test]
    fn initial_condition_single_radiative() {
        let m = RateModel::two_level(25.0 * MHZ, 50.0 * MHZ, 0.3).unwrap();
        let p0 = initial_condition(&m).unwrap();
        assert!((p0[0] - 1.0).abs() < 1e-12);
        assert_eq!(p0[1], 0.0);
    }

    #[test]
    fn initial_condition_two_transitions_into_same_ground() {
        // Radiative decay from two excited states, both landing on state
        // 0: P0 is still a unit mass on the ground state for any C.
        let m = RateModel::from_rates(
            3,
            &[
                (1, 0, 30.0 * MHZ),
                (2, 0, 10.0 * MHZ),
                (0, 1, 50.0 * MHZ),
                (0, 2, 20.0 * MHZ),
            ],
            &[(0, 1, 0.8), (0, 2, 0.1)],
        )
        .unwrap();
        let p0 = initial_condition(&m).unwrap();
        assert!((p0[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_dark_model_has_no_initial_condition() {
        let m = RateModel::from_rates(2, &[(1, 0, 1.0 * MHZ), (0, 1, 2.0 * MHZ)], &[]).unwrap();
        assert!(matches!(initial_condition(&m), Err(DynamicsError::AllDark)));
    }

    #[test]
    fn multi_emitter_equal_brightness() {
        for n in 2..=5 {
            let intensities = vec![1.0; n];
            let g0 = multi_emitter_g2_zero(&intensities).unwrap();
            let expect = (n as f64 - 1.0) / n as f64;
            assert!((g0 - expect).abs() < 1e-15, "n = {n}");
        }
    }

    #[test]
    fn multi_emitter_unequal_pair() {
        let g0 = multi_emitter_g2_zero(&[1.0, 3.0]).unwrap();
        assert!((g0 - 0.375).abs() < 1e-15);
    }

    #[test]
    fn multi_emitter_single_is_zero() {
        assert_eq!(multi_emitter_g2_zero(&[2.7]).unwrap(), 0.0);
    }

    #[test]
    fn multi_emitter_rejects_empty_and_nonpositive() {
        assert!(multi_emitter_g2_zero(&[]).is_err());
        assert!(multi_emitter_g2_zero(&[1.0, 0.0]).is_err());
    }
}
