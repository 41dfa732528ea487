//! Simulated autocorrelation from a rate model.
//!
//! The system starts in the post-detection state and relaxes to steady
//! state; the normalized detected flux along the way is the
//! autocorrelation,
//!
//! ```text
//! g2(τ) = Σ C_ij G_ij P_j(τ) / Σ C_ij G_ij P∞_j ,
//! ```
//!
//! which reduces to `P_e(τ)/P_e∞` for a single radiative transition.
//! Populations come from the eigenrate expansion when the generator is
//! diagonalizable (the default) with the ODE integration used as a
//! cross-check, or from the ODE alone as the fallback for defective
//! generators. The steady-state mismatch at the final grid point,
//! `p_err`, estimates the overall simulation error.

use nalgebra::DVector;

use super::eigen::EigenDecomposition;
use super::ode::{integrate_master_equation, DEFAULT_ABS_TOL, DEFAULT_REL_TOL};
use super::{initial_condition_from, steady_state, DynamicsError, RateModel};

#[derive(Debug, Clone, PartialEq)]
pub enum DynamicsWarning {
    /// The generator was defective; populations come from the ODE path.
    EigenFallback { reason: String },
    /// The grid ends before ten times the slowest relaxation timescale.
    ShortGrid { t_end: f64, slowest_timescale: f64 },
}

/// Output of a g² simulation.
#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub times: Vec<f64>,
    /// State populations at each grid time.
    pub populations: Vec<DVector<f64>>,
    pub g2: Vec<f64>,
    pub steady_state: DVector<f64>,
    pub initial_condition: DVector<f64>,
    /// Present when the eigen path succeeded.
    pub eigen: Option<EigenDecomposition>,
    /// Steady-state detected photon rate, counts/s.
    pub pl_intensity: f64,
    /// `‖P∞(null space) - P_ode(t_end)‖∞`.
    pub p_err: f64,
    /// Sup-norm gap between eigen-reconstructed and integrated
    /// populations over the grid, when both paths ran.
    pub reconstruction_error: Option<f64>,
    pub warnings: Vec<DynamicsWarning>,
}

/// Log-spaced default grid from 1e-2 of the fastest relaxation timescale
/// to 20 times the slowest, from the generator's eigenvalues.
pub fn default_time_grid(model: &RateModel, points: usize) -> Result<Vec<f64>, DynamicsError> {
    if points < 2 {
        return Err(DynamicsError::Config("grid needs at least 2 points".into()));
    }
    let eigenvalues = model.generator().clone().complex_eigenvalues();
    let scale = eigenvalues
        .iter()
        .map(|l| l.re.abs())
        .fold(0.0f64, f64::max);
    let mut slow = f64::INFINITY;
    let mut fast: f64 = 0.0;
    for l in eigenvalues.iter() {
        let decay = -l.re;
        if decay > 1e-9 * scale {
            slow = slow.min(decay);
            fast = fast.max(decay);
        }
    }
    if !slow.is_finite() || fast == 0.0 {
        return Err(DynamicsError::BadModel("no relaxing eigenvalues".into()));
    }
    let t_lo = 1e-2 / fast;
    let t_hi = 20.0 / slow;
    let ratio = t_hi / t_lo;
    Ok((0..points)
        .map(|k| t_lo * ratio.powf(k as f64 / (points - 1) as f64))
        .collect())
}

/// Simulates g²(τ) on the given time grid (ascending, seconds).
pub fn simulate_g2(model: &RateModel, times: &[f64]) -> Result<SimulationResult, DynamicsError> {
    if times.is_empty() || times.windows(2).any(|w| w[0] >= w[1]) || times[0] < 0.0 {
        return Err(DynamicsError::Config(
            "time grid must strictly ascend from >= 0".into(),
        ));
    }
    let steady = steady_state(model)?;
    let p0 = initial_condition_from(model, &steady)?;
    let weights = model.detection_weights();
    let pl_intensity = weights.dot(&steady);
    if !(pl_intensity > 0.0) {
        return Err(DynamicsError::AllDark);
    }

    let mut warnings = Vec::new();

    // The ODE pass runs in every mode: it supplies p_err and, when the
    // eigen path is live, an independent reconstruction check.
    let ode_populations = integrate_master_equation(
        model.generator(),
        &p0,
        times,
        DEFAULT_REL_TOL,
        DEFAULT_ABS_TOL,
    )?;
    for (t, p) in times.iter().zip(&ode_populations) {
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-8 {
            return Err(DynamicsError::Stability(format!(
                "population sum {total} at t = {t:.3e}s"
            )));
        }
        if p.iter().any(|&x| x < -1e-8) {
            return Err(DynamicsError::Stability(format!(
                "negative population at t = {t:.3e}s"
            )));
        }
    }
    let p_err = (steady.clone() - &ode_populations[ode_populations.len() - 1]).amax();

    let (populations, eigen, reconstruction_error) = match EigenDecomposition::compute(model, &p0) {
        Ok(eigen) => {
            let eig_populations: Vec<DVector<f64>> =
                times.iter().map(|&t| eigen.population(t)).collect();
            let gap = eig_populations
                .iter()
                .zip(&ode_populations)
                .map(|(a, b)| (a - b).amax())
                .fold(0.0f64, f64::max);
            if let Some(tau) = eigen.timescales().last() {
                let t_end = times[times.len() - 1];
                if t_end < 10.0 * tau {
                    warnings.push(DynamicsWarning::ShortGrid {
                        t_end,
                        slowest_timescale: *tau,
                    });
                }
            }
            (eig_populations, Some(eigen), Some(gap))
        }
        Err(DynamicsError::Defective(reason)) => {
            warnings.push(DynamicsWarning::EigenFallback { reason });
            (ode_populations.clone(), None, None)
        }
        Err(other) => return Err(other),
    };

    let g2 = populations
        .iter()
        .map(|p| weights.dot(p) / pl_intensity)
        .collect();

    Ok(SimulationResult {
        times: times.to_vec(),
        populations,
        g2,
        steady_state: steady,
        initial_condition: p0,
        eigen,
        pl_intensity,
        p_err,
        reconstruction_error,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::templates::{build_model, ModelTemplate};

    const MHZ: f64 = 1e6;

    #[test]
    fn two_level_closed_form() {
        let m = RateModel::two_level(50.0 * MHZ, 50.0 * MHZ, 1.0).unwrap();
        let times: Vec<f64> = (1..=300).map(|k| k as f64 * 1e-9).collect();
        let sim = simulate_g2(&m, &times).unwrap();
        for (&t, &g) in times.iter().zip(&sim.g2) {
            let expect = 1.0 - (-t / 10e-9).exp();
            assert!((g - expect).abs() < 1e-8, "t = {t}: {g} vs {expect}");
        }
        // g2 at one antibunching timescale.
        let idx = 9; // t = 10 ns
        assert!((sim.g2[idx] - (1.0 - (-1.0f64).exp())).abs() < 1e-8);
        assert!(sim.p_err < 1e-6, "p_err = {}", sim.p_err);
    }

    #[test]
    fn three_level_table_s1_mid_power() {
        let m = build_model(ModelTemplate::ThreeLevelSpontaneous, 50.0, None).unwrap();
        let times = default_time_grid(&m, 300).unwrap();
        let sim = simulate_g2(&m, &times).unwrap();
        assert!(sim.g2[0] < 0.05, "g2(0+) = {}", sim.g2[0]);
        let peak = sim.g2.iter().fold(0.0f64, |m, &g| m.max(g));
        assert!(peak > 1.0, "no bunching shoulder: peak {peak}");
        let last = sim.g2[sim.g2.len() - 1];
        assert!((last - 1.0).abs() < 1e-6, "g2(inf) = {last}");
        assert!(sim.p_err < 1e-6);
        assert!(sim.reconstruction_error.unwrap() < 1e-8);
    }

    #[test]
    fn steady_state_matches_long_time_ode() {
        let m = build_model(ModelTemplate::NvNineLevel, 26.25, None).unwrap();
        let times = default_time_grid(&m, 200).unwrap();
        let sim = simulate_g2(&m, &times).unwrap();
        assert!(sim.p_err < 1e-6, "p_err = {}", sim.p_err);
        for p in &sim.populations {
            let total: f64 = p.iter().sum();
            assert!((total - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn eigen_and_ode_paths_agree() {
        let m = build_model(ModelTemplate::FiveLevelSpin, 50.0, None).unwrap();
        let times = default_time_grid(&m, 250).unwrap();
        let sim = simulate_g2(&m, &times).unwrap();
        assert!(sim.eigen.is_some());
        let gap = sim.reconstruction_error.unwrap();
        assert!(gap < 1e-8, "eigen vs ode gap {gap}");
    }

    #[test]
    fn grid_validation() {
        let m = RateModel::two_level(1.0 * MHZ, 1.0 * MHZ, 1.0).unwrap();
        assert!(simulate_g2(&m, &[]).is_err());
        assert!(simulate_g2(&m, &[1e-9, 1e-9]).is_err());
        assert!(simulate_g2(&m, &[-1e-9, 1e-9]).is_err());
    }
}
