//! Spin-1 Hamiltonians and field-induced rate mixing.
//!
//! A triplet manifold with a single symmetry axis carries
//! `H = g μ_B B·S + D (S_z² - S(S+1)/3)`. An off-axis magnetic field
//! mixes the `m_S` eigenstates; spin-dependent rates keyed by `m_S` are
//! redistributed over the new eigenstates by their squared projections
//! (Born weighting), and optical rates between two manifolds by the
//! squared overlaps of their eigenvectors.

use nalgebra::{Matrix3, Vector3};

use super::DynamicsError;

/// Bohr magneton over Planck's constant, MHz per gauss.
pub const BOHR_MAGNETON_MHZ_PER_G: f64 = 1.399_624_49;

/// One spin-1 manifold: isotropic g-factor and zero-field splitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinManifold {
    pub g_factor: f64,
    pub zero_field_splitting_mhz: f64,
}

/// Magnetic-field configuration for spin-dependent templates. The angle
/// is the polar angle between the field and the defect axis; manifold
/// parameters default to the template's values when `manifolds` is `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinParams {
    pub b_amp_gauss: f64,
    pub b_angle_deg: f64,
    pub manifolds: Option<Vec<SpinManifold>>,
}

impl SpinParams {
    pub fn field(b_amp_gauss: f64, b_angle_deg: f64) -> Self {
        Self {
            b_amp_gauss,
            b_angle_deg,
            manifolds: None,
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.b_amp_gauss >= 0.0) || !self.b_amp_gauss.is_finite() {
            return Err(DynamicsError::Config(format!(
                "field amplitude {} G must be >= 0",
                self.b_amp_gauss
            )));
        }
        if !(0.0..=180.0).contains(&self.b_angle_deg) {
            return Err(DynamicsError::Config(format!(
                "field angle {} deg must lie in [0, 180]",
                self.b_angle_deg
            )));
        }
        if let Some(manifolds) = &self.manifolds {
            for m in manifolds {
                if !m.zero_field_splitting_mhz.is_finite() || !m.g_factor.is_finite() {
                    return Err(DynamicsError::Config(
                        "non-finite manifold parameters".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Spin-1 operators in the `|+1>, |0>, |-1>` basis.
fn spin1_sz() -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(1.0, 0.0, -1.0))
}

fn spin1_sx() -> Matrix3<f64> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    Matrix3::new(0.0, r, 0.0, r, 0.0, r, 0.0, r, 0.0)
}

/// The spin Hamiltonian in MHz for a field of `b_amp_gauss` at polar
/// angle `b_angle_deg` from the symmetry axis. The azimuthal angle is
/// irrelevant by symmetry, so the field lies in the x-z plane and the
/// matrix is real symmetric.
pub fn spin_hamiltonian_mhz(
    manifold: &SpinManifold,
    b_amp_gauss: f64,
    b_angle_deg: f64,
) -> Matrix3<f64> {
    let theta = b_angle_deg.to_radians();
    let zeeman = manifold.g_factor * BOHR_MAGNETON_MHZ_PER_G * b_amp_gauss;
    let bz = zeeman * theta.cos();
    let bx = zeeman * theta.sin();
    let sz = spin1_sz();
    let d = manifold.zero_field_splitting_mhz;
    bx * spin1_sx() + bz * sz + d * (sz * sz - Matrix3::identity() * (2.0 / 3.0))
}

/// Orthonormal eigenbasis of the manifold Hamiltonian.
///
/// Columns are labeled by their dominant `m_S` component (the
/// permutation maximizing the total squared diagonal overlap), so the
/// basis reduces to the identity at zero field and for axial fields, and
/// eigenstate labels follow the zero-field states adiabatically.
pub fn spin_eigenbasis(
    manifold: &SpinManifold,
    b_amp_gauss: f64,
    b_angle_deg: f64,
) -> Matrix3<f64> {
    let h = spin_hamiltonian_mhz(manifold, b_amp_gauss, b_angle_deg);
    let eigen = nalgebra::SymmetricEigen::new(h);
    const PERMUTATIONS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let best = PERMUTATIONS
        .iter()
        .max_by(|a, b| {
            let score = |p: &[usize; 3]| -> f64 {
                (0..3).map(|m| eigen.eigenvectors[(m, p[m])].powi(2)).sum()
            };
            score(a).total_cmp(&score(b))
        })
        .unwrap();
    let mut u = Matrix3::zeros();
    for m in 0..3 {
        let mut col = eigen.eigenvectors.column(best[m]).clone_owned();
        if col[m] < 0.0 {
            col = -col;
        }
        u.set_column(m, &col);
    }
    u
}

/// Squared-projection weights `O_mk = |U_mk|²` of eigenbasis columns on
/// the `m_S` basis. Rows and columns each sum to one.
pub fn overlap_weights(basis: &Matrix3<f64>) -> Matrix3<f64> {
    basis.map(|x| x * x)
}

/// Redistributes zero-field rates keyed by `m_S = (+1, 0, -1)` over the
/// field-mixed eigenstates: `rate_k = Σ_m |U_mk|² rate_m`.
pub fn spin_mixing(
    manifold: &SpinManifold,
    b_amp_gauss: f64,
    b_angle_deg: f64,
    rates_by_ms: [f64; 3],
) -> [f64; 3] {
    let weights = overlap_weights(&spin_eigenbasis(manifold, b_amp_gauss, b_angle_deg));
    let mut out = [0.0; 3];
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = (0..3).map(|m| weights[(m, k)] * rates_by_ms[m]).sum();
    }
    out
}

/// Squared overlaps between the eigenstates of two manifolds in the same
/// field: entry `(a, b)` is `|<χ_a^to | χ_b^from>|²`. Used to distribute
/// spin-conserving optical rates between ground and excited manifolds.
pub fn optical_overlap_weights(to_basis: &Matrix3<f64>, from_basis: &Matrix3<f64>) -> Matrix3<f64> {
    (to_basis.transpose() * from_basis).map(|x| x * x)
}

#[cfg(test)]
mod tests {
    use super::*;

    const NV_GS: SpinManifold = SpinManifold {
        g_factor: 2.0028,
        zero_field_splitting_mhz: 2859.0,
    };
    const NV_ES: SpinManifold = SpinManifold {
        g_factor: 2.01,
        zero_field_splitting_mhz: 1425.0,
    };

    #[test]
    fn zero_field_leaves_rates_unchanged() {
        let rates = [60.0, 5.0, 60.0];
        let mixed = spin_mixing(&NV_GS, 0.0, 0.0, rates);
        for (a, b) in mixed.iter().zip(&rates) {
            assert!((a - b).abs() < 1e-9, "{mixed:?}");
        }
    }

    #[test]
    fn axial_field_commutes_with_sz() {
        // At angle 0 the Hamiltonian stays diagonal in m_S, so mixing is a
        // permutation at most and symmetric rates come back unchanged.
        let rates = [60.0, 5.0, 60.0];
        for &b in &[10.0, 300.0, 5000.0] {
            let mixed = spin_mixing(&NV_ES, b, 0.0, rates);
            for (a, e) in mixed.iter().zip(&rates) {
                assert!((a - e).abs() < 1e-9, "B = {b}: {mixed:?}");
            }
        }
    }

    #[test]
    fn overlap_matrix_is_doubly_stochastic() {
        for &(b, angle) in &[(46.0, 30.0), (46.0, 60.0), (300.0, 50.0), (120.0, 110.0)] {
            let u = spin_eigenbasis(&NV_GS, b, angle);
            let w = overlap_weights(&u);
            for k in 0..3 {
                let row: f64 = (0..3).map(|j| w[(k, j)]).sum();
                let col: f64 = (0..3).map(|i| w[(i, k)]).sum();
                assert!((row - 1.0).abs() < 1e-12, "row {k} sums to {row}");
                assert!((col - 1.0).abs() < 1e-12, "col {k} sums to {col}");
            }
        }
    }

    #[test]
    fn optical_overlaps_are_doubly_stochastic() {
        let gs = spin_eigenbasis(&NV_GS, 300.0, 50.0);
        let es = spin_eigenbasis(&NV_ES, 300.0, 50.0);
        let w = optical_overlap_weights(&gs, &es);
        for k in 0..3 {
            let row: f64 = (0..3).map(|j| w[(k, j)]).sum();
            let col: f64 = (0..3).map(|i| w[(i, k)]).sum();
            assert!((row - 1.0).abs() < 1e-12);
            assert!((col - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn off_axis_field_mixes_rates() {
        let rates = [2.5e-4, 4.9995, 2.5e-4];
        let five_level = SpinManifold {
            g_factor: 2.0028,
            zero_field_splitting_mhz: 1000.0,
        };
        let mixed = spin_mixing(&five_level, 46.0, 60.0, rates);
        let total_before: f64 = rates.iter().sum();
        let total_after: f64 = mixed.iter().sum();
        // Doubly stochastic mixing conserves the total rate.
        assert!((total_before - total_after).abs() < 1e-9);
        // The m_S = 0 channel sheds weight into the +-1 channels.
        assert!(mixed.iter().all(|&r| r > 2.5e-4), "{mixed:?}");
    }

    #[test]
    fn spin_params_validation() {
        assert!(SpinParams::field(46.0, 60.0).validate().is_ok());
        assert!(SpinParams::field(-1.0, 0.0).validate().is_err());
        assert!(SpinParams::field(46.0, 200.0).validate().is_err());
    }
}
