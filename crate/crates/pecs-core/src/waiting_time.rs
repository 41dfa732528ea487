//! Waiting-time distributions W(τ) and their relation to g²(τ).
//!
//! W(τ)dτ is the probability that the next *detected* photon arrives a
//! delay τ after the previous one, so unlike g² it depends on the
//! collection efficiency. The two-level form has a closed expression for
//! any collection efficiency; the three-level form (unity collection) is
//! evaluated by summing the non-radiative loop convolution series on a
//! uniform grid. g² is recovered from W through the renewal series
//! `g2 ∝ W + W*W + ...`.

use thiserror::Error;

use crate::conv::{convolution_series, trapezoid, Convolver, UniformGrid};

#[derive(Debug, Error)]
pub enum WaitingTimeError {
    #[error("rates must be positive: {0}")]
    BadRate(f64),
    #[error("collection efficiency must lie in (0, 1], got {0}")]
    BadCollection(f64),
    #[error("grid too coarse: rate*step = {0:.3e} exceeds the convolution error budget")]
    GridTooCoarse(f64),
    #[error("grid extent too short for the convolution series to converge")]
    Extent,
    #[error("degenerate waiting curve: {0}")]
    Degenerate(String),
}

/// Rates the curve was built from, per second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WaitingRates {
    TwoLevel { gamma_ge: f64, gamma_eg: f64 },
    ThreeLevel(ThreeLevelRates),
}

/// Three-level rates: pump g→e, radiative e→g, crossing e→m, return m→g.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeLevelRates {
    pub gamma_ge: f64,
    pub gamma_eg: f64,
    pub gamma_em: f64,
    pub gamma_mg: f64,
}

/// A waiting-time distribution sampled on a uniform grid from τ = 0.
#[derive(Debug, Clone)]
pub struct WaitingCurve {
    grid: UniformGrid,
    values: Vec<f64>,
    collection: f64,
    rates: WaitingRates,
    /// Mean interval between detected photons, seconds (analytic).
    mean_interval: f64,
}

impl WaitingCurve {
    pub fn times(&self) -> Vec<f64> {
        self.grid.times()
    }

    pub fn grid(&self) -> UniformGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn collection(&self) -> f64 {
        self.collection
    }

    pub fn rates(&self) -> WaitingRates {
        self.rates
    }

    pub fn mean_interval(&self) -> f64 {
        self.mean_interval
    }

    /// Numerical mass ∫ W dτ over the grid; approaches 1 as the grid
    /// extends.
    pub fn mass(&self) -> f64 {
        trapezoid(&self.values, self.grid.step)
    }
}

/// Pump-rate asymmetry `α = |Γ_eg - Γ_ge| / (Γ_eg + Γ_ge)`, in [0, 1).
pub fn alpha(gamma_ge: f64, gamma_eg: f64) -> f64 {
    (gamma_eg - gamma_ge).abs() / (gamma_eg + gamma_ge)
}

fn check_rate(rate: f64) -> Result<f64, WaitingTimeError> {
    if rate > 0.0 && rate.is_finite() {
        Ok(rate)
    } else {
        Err(WaitingTimeError::BadRate(rate))
    }
}

/// sinh(x)/x, series-expanded near zero where the direct quotient loses
/// precision (covers the equal-rate, unity-collection degeneracy).
fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 + x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sinh() / x
    }
}

/// Two-level waiting-time distribution at collection efficiency `c`:
///
/// ```text
/// W(τ) = C Γge Γeg τ e^{-(Γge+Γeg)τ/2} sinhc(sτ/2),
/// s = sqrt((Γge+Γeg)^2 - 4 C Γge Γeg)
/// ```
///
/// At `c = 1` this reduces to the difference-of-exponentials form, and for
/// equal rates to `Γ² τ e^{-Γτ}`.
pub fn waiting_two_level(
    gamma_ge: f64,
    gamma_eg: f64,
    collection: f64,
    grid: UniformGrid,
) -> Result<WaitingCurve, WaitingTimeError> {
    check_rate(gamma_ge)?;
    check_rate(gamma_eg)?;
    if !(collection > 0.0 && collection <= 1.0) {
        return Err(WaitingTimeError::BadCollection(collection));
    }
    let sigma = gamma_ge + gamma_eg;
    let s = (sigma * sigma - 4.0 * collection * gamma_ge * gamma_eg)
        .max(0.0)
        .sqrt();
    let amplitude = collection * gamma_ge * gamma_eg;
    // e^{-σt/2} sinh(st/2) rewritten with strictly negative exponents;
    // sinh alone overflows long before the product decays.
    let values = grid
        .times()
        .iter()
        .map(|&t| {
            let x = 0.5 * s * t;
            if x < 1e-4 {
                amplitude * t * (-0.5 * sigma * t).exp() * sinhc(x)
            } else {
                amplitude / s * ((-0.5 * (sigma - s) * t).exp() - (-0.5 * (sigma + s) * t).exp())
            }
        })
        .collect();
    Ok(WaitingCurve {
        grid,
        values,
        collection,
        rates: WaitingRates::TwoLevel { gamma_ge, gamma_eg },
        // Every detected photon has a successor: the detected rate is
        // C times the emission rate Γge Γeg / (Γge + Γeg).
        mean_interval: sigma / (collection * gamma_ge * gamma_eg),
    })
}

/// Truncation threshold for convolution series, per the sup-norm rule.
const SERIES_REL_TOL: f64 = 1e-10;

/// Three-level waiting-time distribution at unity collection:
/// `W = f_ge * f_eg * (δ + h + h*h + ...)` with `h = f_ge * f_em * f_mg`
/// the non-radiative loop density. Branch densities carry the full
/// survival rate of the excited state, `Γ_eg + Γ_em`.
pub fn waiting_three_level(
    rates: ThreeLevelRates,
    grid: UniformGrid,
) -> Result<WaitingCurve, WaitingTimeError> {
    let ThreeLevelRates {
        gamma_ge,
        gamma_eg,
        gamma_em,
        gamma_mg,
    } = rates;
    check_rate(gamma_ge)?;
    check_rate(gamma_eg)?;
    check_rate(gamma_mg)?;
    if gamma_em < 0.0 || !gamma_em.is_finite() {
        return Err(WaitingTimeError::BadRate(gamma_em));
    }
    let exit_e = gamma_eg + gamma_em;
    let max_rate = gamma_ge.max(exit_e).max(gamma_mg);
    let budget = max_rate * grid.step;
    // Trapezoid convolution error ~ (rate*step)^2 / 12 per pass.
    if budget > 0.035 {
        return Err(WaitingTimeError::GridTooCoarse(budget));
    }

    let times = grid.times();
    let sample = |rate: f64, total: f64| -> Vec<f64> {
        times.iter().map(|&t| rate * (-total * t).exp()).collect()
    };
    let f_ge = sample(gamma_ge, gamma_ge);
    let f_eg = sample(gamma_eg, exit_e);

    let mut conv = Convolver::new(grid.n);
    let base = conv.convolve(&f_ge, &f_eg, grid.step);

    let mut values = if gamma_em == 0.0 {
        base
    } else {
        let f_em = sample(gamma_em, exit_e);
        let f_mg = sample(gamma_mg, gamma_mg);
        let loop_density = {
            let ge_em = conv.convolve(&f_ge, &f_em, grid.step);
            conv.convolve(&ge_em, &f_mg, grid.step)
        };
        convolution_series(&base, &loop_density, grid.step, SERIES_REL_TOL, 10_000)
            .ok_or(WaitingTimeError::Extent)?
    };
    // The convolution of finite densities vanishes at τ = 0 exactly; clear
    // the FFT roundoff there and clamp noise-level negatives.
    values[0] = 0.0;
    for v in &mut values {
        if *v < 0.0 {
            *v = 0.0;
        }
    }

    // Mean detected interval: radiative cycle plus the expected number of
    // non-radiative loops, Γ_em/Γ_eg, times the loop duration.
    let cycle = 1.0 / gamma_ge + 1.0 / exit_e;
    let loops = gamma_em / gamma_eg;
    let mean_interval = cycle + loops * (cycle + 1.0 / gamma_mg);

    Ok(WaitingCurve {
        grid,
        values,
        collection: 1.0,
        rates: WaitingRates::ThreeLevel(rates),
        mean_interval,
    })
}

/// Reconstructs g²(τ) from a waiting-time curve through the renewal
/// series `u = W + W*W + ...`, normalized by the asymptotic density
/// (`u → 1/mean interval` as τ → ∞): `g², = u * mean`.
pub fn g2_from_waiting(curve: &WaitingCurve) -> Result<Vec<f64>, WaitingTimeError> {
    let sup = curve.values.iter().fold(0.0f64, |m, &x| m.max(x));
    if sup <= 0.0 {
        return Err(WaitingTimeError::Degenerate(
            "W vanishes on the grid".into(),
        ));
    }
    let step = curve.grid.step;
    let max_terms = (4.0 * curve.grid.extent() / curve.mean_interval).ceil() as usize + 200;
    let renewal = convolution_series(
        &curve.values,
        &curve.values,
        step,
        SERIES_REL_TOL,
        max_terms,
    )
    .ok_or(WaitingTimeError::Extent)?;
    Ok(renewal.iter().map(|&u| u * curve.mean_interval).collect())
}

/// Sup-distance between the peak-normalized W shape and a reference g²
/// sampled on the same grid, evaluated up to the W peak. Quantifies how
/// well a waiting-time trace approximates the autocorrelation.
pub fn normalized_shape_distance(curve: &WaitingCurve, g2_reference: &[f64]) -> f64 {
    assert_eq!(curve.values.len(), g2_reference.len());
    let (peak_idx, peak) = curve.values.iter().enumerate().fold(
        (0, 0.0f64),
        |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
    );
    if peak <= 0.0 {
        return f64::INFINITY;
    }
    curve.values[..=peak_idx]
        .iter()
        .zip(g2_reference)
        .map(|(&w, &g)| (w / peak - g).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MHZ: f64 = 1e6;

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha(5.0, 5.0), 0.0);
        assert!((alpha(2.0, 6.0) - 0.5).abs() < 1e-15);
        assert!(alpha(1e9, 1.0) > 0.999);
        assert!(alpha(1.0, 1e9) < 1.0);
    }

    #[test]
    fn two_level_unity_collection_matches_difference_form() {
        let (ge, eg) = (25.0 * MHZ, 50.0 * MHZ);
        let grid = UniformGrid::with_extent(0.1e-9, 400e-9);
        let curve = waiting_two_level(ge, eg, 1.0, grid).unwrap();
        for (&t, &w) in grid.times().iter().zip(curve.values()) {
            let expect = ge * eg / (ge - eg) * ((-eg * t).exp() - (-ge * t).exp());
            assert!((w - expect).abs() < 1e-9 * ge.max(eg), "t={t}");
        }
        assert_eq!(curve.values()[0], 0.0);
    }

    #[test]
    fn two_level_equal_rates_degenerate_branch() {
        let g = 50.0 * MHZ;
        let grid = UniformGrid::with_extent(0.1e-9, 400e-9);
        let curve = waiting_two_level(g, g, 1.0, grid).unwrap();
        for (&t, &w) in grid.times().iter().zip(curve.values()) {
            let expect = g * g * t * (-g * t).exp();
            assert!((w - expect).abs() < 1e-10 * g, "t={t}: {w} vs {expect}");
        }
    }

    #[test]
    fn two_level_mass_reaches_unity_for_any_collection() {
        for &c in &[1.0, 0.5, 0.1] {
            let grid = UniformGrid::with_extent(0.5e-9, 40.0 / (c * 25.0 * MHZ));
            let curve = waiting_two_level(50.0 * MHZ, 50.0 * MHZ, c, grid).unwrap();
            let mass = curve.mass();
            assert!((mass - 1.0).abs() < 1e-3, "c={c}: mass {mass}");
            assert!(curve.values().iter().all(|&w| w >= 0.0));
        }
    }

    #[test]
    fn three_level_reduces_to_two_level_without_crossing() {
        let grid = UniformGrid::with_extent(0.2e-9, 300e-9);
        let rates = ThreeLevelRates {
            gamma_ge: 25.0 * MHZ,
            gamma_eg: 50.0 * MHZ,
            gamma_em: 0.0,
            gamma_mg: 2.5 * MHZ,
        };
        let three = waiting_three_level(rates, grid).unwrap();
        let two = waiting_two_level(25.0 * MHZ, 50.0 * MHZ, 1.0, grid).unwrap();
        let scale = 50.0 * MHZ;
        for (w3, w2) in three.values().iter().zip(two.values()) {
            assert!((w3 - w2).abs() < 1e-6 * scale, "{w3} vs {w2}");
        }
    }

    #[test]
    fn three_level_table_rates_normalize() {
        let rates = ThreeLevelRates {
            gamma_ge: 50.0 * MHZ,
            gamma_eg: 50.0 * MHZ,
            gamma_em: 5.0 * MHZ,
            gamma_mg: 2.5 * MHZ,
        };
        let grid = UniformGrid::with_extent(0.5e-9, 5e-6);
        let curve = waiting_three_level(rates, grid).unwrap();
        let mass = curve.mass();
        assert!((mass - 1.0).abs() < 1e-3, "mass {mass}");
        assert_eq!(curve.values()[0], 0.0);
        assert!(curve.values().iter().all(|&w| w >= -1e-9));
    }

    #[test]
    fn three_level_rejects_coarse_grid() {
        let rates = ThreeLevelRates {
            gamma_ge: 50.0 * MHZ,
            gamma_eg: 50.0 * MHZ,
            gamma_em: 5.0 * MHZ,
            gamma_mg: 2.5 * MHZ,
        };
        let grid = UniformGrid::with_extent(10e-9, 5e-6);
        assert!(matches!(
            waiting_three_level(rates, grid),
            Err(WaitingTimeError::GridTooCoarse(_))
        ));
    }

    #[test]
    fn g2_reconstruction_matches_closed_form_for_all_collections() {
        let (ge, eg) = (50.0 * MHZ, 50.0 * MHZ);
        let sigma = ge + eg;
        for &c in &[1.0, 0.5, 0.1] {
            let grid = UniformGrid::with_extent(1e-11, 10.0 / sigma);
            let curve = waiting_two_level(ge, eg, c, grid).unwrap();
            let g2 = g2_from_waiting(&curve).unwrap();
            let sup = grid
                .times()
                .iter()
                .zip(&g2)
                .map(|(&t, &g)| (g - (1.0 - (-sigma * t).exp())).abs())
                .fold(0.0f64, f64::max);
            assert!(sup < 1e-4, "c={c}: sup distance {sup}");
        }
    }

    #[test]
    fn g2_reconstruction_fails_on_zero_curve() {
        let grid = UniformGrid::with_extent(1e-9, 1e-6);
        let mut curve = waiting_two_level(50.0 * MHZ, 50.0 * MHZ, 1.0, grid).unwrap();
        for v in &mut curve.values {
            *v = 0.0;
        }
        assert!(matches!(
            g2_from_waiting(&curve),
            Err(WaitingTimeError::Degenerate(_))
        ));
    }

    #[test]
    fn shape_approaches_g2_as_collection_drops() {
        let (ge, eg) = (50.0 * MHZ, 50.0 * MHZ);
        let sigma = ge + eg;
        let mut last = f64::INFINITY;
        for &c in &[1.0, 0.5, 0.1, 0.01] {
            let grid = UniformGrid::with_extent(0.5e-9, 60.0 / (c * sigma / 2.0));
            let curve = waiting_two_level(ge, eg, c, grid).unwrap();
            let g2: Vec<f64> = grid
                .times()
                .iter()
                .map(|&t| 1.0 - (-sigma * t).exp())
                .collect();
            let d = normalized_shape_distance(&curve, &g2);
            assert!(d < last, "distance not monotone at c={c}: {d} vs {last}");
            last = d;
        }
    }
}
