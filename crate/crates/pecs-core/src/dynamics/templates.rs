//! Named model templates for simulation studies, plus JSON model files.
//!
//! Four templates cover the standard hypotheses for an emitter with
//! antibunching and one bunching shoulder:
//!
//! - `three-level-spontaneous`: pumped excitation, fixed intersystem
//!   crossing into a metastable state.
//! - `three-level-pumped`: crossing and return both scale with the
//!   pump rate (ionization/recombination-like charge cycling).
//! - `five-level-spin`: singlet ground/excited pair with a metastable
//!   spin triplet and field-mixable, spin-dependent crossing rates.
//! - `nv-nine-level`: nitrogen-vacancy model with spin-resolved ground
//!   and excited triplets, singlet shelving, and power-dependent
//!   ionization/recombination through the neutral charge state.
//!
//! Rates quoted as multiples of the excitation rate scale with the
//! dimensionless pump ratio `k_ex / k_ex(reference)`, where the
//! reference is the template's middle tabulated power; at the reference
//! power the pumped rates equal their printed MHz coefficients, which
//! keeps the reference curves of all templates directly comparable.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::spin::{
    optical_overlap_weights, spin_eigenbasis, spin_mixing, SpinManifold, SpinParams,
};
use super::{DynamicsError, RateModel};

const MHZ: f64 = 1e6;

/// Three-level and five-level radiative rate, MHz.
const K_R: f64 = 50.0;
/// Three-level crossing / return rates at the reference power, MHz.
const K_ISC0: f64 = 5.0;
const K_ISC0_OUT: f64 = 2.5;
/// Reference (middle tabulated) excitation rate, MHz.
const THREE_LEVEL_KEX_REF: f64 = 50.0;

/// Five-level zero-field crossing rates keyed by m_S = (+1, 0, -1), MHz.
const FIVE_ISC_IN: [f64; 3] = [2.5e-4, 4.9995, 2.5e-4];
const FIVE_ISC_OUT: [f64; 3] = [0.025, 2.5, 0.025];
const FIVE_LEVEL_MANIFOLD: SpinManifold = SpinManifold {
    g_factor: 2.0028,
    zero_field_splitting_mhz: 1000.0,
};

/// Nitrogen-vacancy parameters, MHz (rates) and per-k_ex (charge cycle).
const NV_K_R: f64 = 75.0;
const NV_ISC_IN: [f64; 3] = [60.0, 5.0, 60.0];
const NV_ISC_OUT: [f64; 3] = [2.75, 3.11, 2.75];
const NV_ION_PER_KEX: f64 = 3.0;
const NV_REC_PER_KEX: f64 = 2.25;
const NV_KEX_REF: f64 = 26.25;
const NV_GS: SpinManifold = SpinManifold {
    g_factor: 2.0028,
    zero_field_splitting_mhz: 2859.0,
};
const NV_ES: SpinManifold = SpinManifold {
    g_factor: 2.01,
    zero_field_splitting_mhz: 1425.0,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelTemplate {
    ThreeLevelSpontaneous,
    ThreeLevelPumped,
    FiveLevelSpin,
    NvNineLevel,
}

impl ModelTemplate {
    pub fn name(&self) -> &'static str {
        match self {
            ModelTemplate::ThreeLevelSpontaneous => "three-level-spontaneous",
            ModelTemplate::ThreeLevelPumped => "three-level-pumped",
            ModelTemplate::FiveLevelSpin => "five-level-spin",
            ModelTemplate::NvNineLevel => "nv-nine-level",
        }
    }

    pub fn supports_spin(&self) -> bool {
        matches!(
            self,
            ModelTemplate::FiveLevelSpin | ModelTemplate::NvNineLevel
        )
    }

    /// The tabulated excitation-rate sweep for this template, MHz.
    pub fn tabulated_kex_mhz(&self) -> [f64; 3] {
        match self {
            ModelTemplate::NvNineLevel => [13.125, 26.25, 52.5],
            _ => [25.0, 50.0, 100.0],
        }
    }

    /// The tabulated field-angle sweep (deg) for the spin templates.
    pub fn tabulated_angles_deg(&self) -> Option<[f64; 3]> {
        match self {
            ModelTemplate::FiveLevelSpin => Some([0.0, 30.0, 60.0]),
            ModelTemplate::NvNineLevel => Some([0.0, 15.0, 50.0]),
            _ => None,
        }
    }

    /// The tabulated field amplitude (gauss) for the spin templates.
    pub fn tabulated_field_gauss(&self) -> Option<f64> {
        match self {
            ModelTemplate::FiveLevelSpin => Some(46.0),
            ModelTemplate::NvNineLevel => Some(300.0),
            _ => None,
        }
    }
}

impl FromStr for ModelTemplate {
    type Err = DynamicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "three-level-spontaneous" => Ok(ModelTemplate::ThreeLevelSpontaneous),
            "three-level-pumped" => Ok(ModelTemplate::ThreeLevelPumped),
            "five-level-spin" => Ok(ModelTemplate::FiveLevelSpin),
            "nv-nine-level" => Ok(ModelTemplate::NvNineLevel),
            other => Err(DynamicsError::Config(format!(
                "unknown template `{other}` (expected three-level-spontaneous, \
                 three-level-pumped, five-level-spin, or nv-nine-level)"
            ))),
        }
    }
}

/// Builds a concrete rate model from a template at excitation rate
/// `k_ex_mhz`, optionally in a magnetic field for the spin templates.
pub fn build_model(
    template: ModelTemplate,
    k_ex_mhz: f64,
    spin: Option<&SpinParams>,
) -> Result<RateModel, DynamicsError> {
    if !(k_ex_mhz > 0.0) || !k_ex_mhz.is_finite() {
        return Err(DynamicsError::Config(format!(
            "k_ex = {k_ex_mhz} MHz must be positive"
        )));
    }
    if let Some(spin) = spin {
        spin.validate()?;
        if !template.supports_spin() {
            return Err(DynamicsError::Config(format!(
                "template `{}` has no spin states",
                template.name()
            )));
        }
    }
    match template {
        ModelTemplate::ThreeLevelSpontaneous => three_level(k_ex_mhz, K_ISC0, K_ISC0_OUT),
        ModelTemplate::ThreeLevelPumped => {
            let power_ratio = k_ex_mhz / THREE_LEVEL_KEX_REF;
            three_level(k_ex_mhz, K_ISC0 * power_ratio, K_ISC0_OUT * power_ratio)
        }
        ModelTemplate::FiveLevelSpin => five_level(k_ex_mhz, spin),
        ModelTemplate::NvNineLevel => nv_nine_level(k_ex_mhz, spin),
    }
}

/// States `[ground, excited, metastable]`; single radiative transition.
fn three_level(k_ex: f64, k_isc: f64, k_isc_out: f64) -> Result<RateModel, DynamicsError> {
    RateModel::from_rates(
        3,
        &[
            (1, 0, k_ex * MHZ),
            (0, 1, K_R * MHZ),
            (2, 1, k_isc * MHZ),
            (0, 2, k_isc_out * MHZ),
        ],
        &[(0, 1, 1.0)],
    )
}

fn manifold_override(
    spin: Option<&SpinParams>,
    index: usize,
    default: SpinManifold,
) -> SpinManifold {
    spin.and_then(|s| s.manifolds.as_ref())
        .and_then(|m| m.get(index))
        .copied()
        .unwrap_or(default)
}

/// States `[ground, excited, m_+1, m_0, m_-1]` with the triplet sublevels
/// replaced by field eigenstates when a field is applied.
fn five_level(k_ex: f64, spin: Option<&SpinParams>) -> Result<RateModel, DynamicsError> {
    let (b, angle) = spin.map_or((0.0, 0.0), |s| (s.b_amp_gauss, s.b_angle_deg));
    let manifold = manifold_override(spin, 0, FIVE_LEVEL_MANIFOLD);
    let isc_in = spin_mixing(&manifold, b, angle, FIVE_ISC_IN);
    let isc_out = spin_mixing(&manifold, b, angle, FIVE_ISC_OUT);

    let mut rates = vec![(1usize, 0usize, k_ex * MHZ), (0, 1, K_R * MHZ)];
    for k in 0..3 {
        rates.push((2 + k, 1, isc_in[k] * MHZ));
        rates.push((0, 2 + k, isc_out[k] * MHZ));
    }
    RateModel::from_rates(5, &rates, &[(0, 1, 1.0)])
}

/// States `[gs_+1, gs_0, gs_-1, es_+1, es_0, es_-1, singlet, nv0_gs,
/// nv0_es]`. Optical rates distribute by ground/excited eigenvector
/// overlaps; crossing rates by squared spin projections; ionization and
/// recombination scale with the pump ratio. Both charge states fluoresce.
fn nv_nine_level(k_ex: f64, spin: Option<&SpinParams>) -> Result<RateModel, DynamicsError> {
    let (b, angle) = spin.map_or((0.0, 0.0), |s| (s.b_amp_gauss, s.b_angle_deg));
    let gs = manifold_override(spin, 0, NV_GS);
    let es = manifold_override(spin, 1, NV_ES);
    let power_ratio = k_ex / NV_KEX_REF;
    let k_ion = NV_ION_PER_KEX * power_ratio;
    let k_rec = NV_REC_PER_KEX * power_ratio;

    let gs_basis = spin_eigenbasis(&gs, b, angle);
    let es_basis = spin_eigenbasis(&es, b, angle);
    // optical[(b_es, a_gs)] = |<es_b | gs_a>|^2.
    let optical = optical_overlap_weights(&es_basis, &gs_basis);
    let isc_in = spin_mixing(&es, b, angle, NV_ISC_IN);
    let isc_out = spin_mixing(&gs, b, angle, NV_ISC_OUT);

    let (gs0, es0, singlet, nv0_gs, nv0_es) = (0usize, 3usize, 6usize, 7usize, 8usize);
    let mut rates = Vec::new();
    let mut radiative = Vec::new();
    for a in 0..3 {
        for bq in 0..3 {
            let w = optical[(bq, a)];
            if w > 0.0 {
                rates.push((es0 + bq, gs0 + a, k_ex * w * MHZ));
                rates.push((gs0 + a, es0 + bq, NV_K_R * w * MHZ));
                radiative.push((gs0 + a, es0 + bq, 1.0));
            }
        }
    }
    for k in 0..3 {
        rates.push((singlet, es0 + k, isc_in[k] * MHZ));
        rates.push((gs0 + k, singlet, isc_out[k] * MHZ));
        rates.push((nv0_gs, es0 + k, k_ion * MHZ));
        // Recombination is spin-agnostic: equal thirds into the ground
        // sublevels.
        rates.push((gs0 + k, nv0_es, k_rec / 3.0 * MHZ));
    }
    rates.push((nv0_es, nv0_gs, k_ex * MHZ));
    rates.push((nv0_gs, nv0_es, NV_K_R * MHZ));
    radiative.push((nv0_gs, nv0_es, 1.0));

    RateModel::from_rates(9, &rates, &radiative)
}

/// On-disk model description: either a named template with parameters or
/// explicit generator/collection matrices (rates in MHz, row-major).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub template: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_ex_mhz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_amp_gauss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_angle_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator_mhz: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collection: Option<Vec<Vec<f64>>>,
}

impl ModelFile {
    pub fn build(&self) -> Result<RateModel, DynamicsError> {
        match (&self.template, &self.generator_mhz) {
            (Some(name), None) => {
                let template: ModelTemplate = name.parse()?;
                let k_ex = self
                    .k_ex_mhz
                    .ok_or_else(|| DynamicsError::File("template models need `k_ex_mhz`".into()))?;
                let spin = self
                    .b_amp_gauss
                    .map(|b| SpinParams::field(b, self.b_angle_deg.unwrap_or(0.0)));
                build_model(template, k_ex, spin.as_ref())
            }
            (None, Some(rows)) => {
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(DynamicsError::File("generator matrix is not square".into()));
                }
                let generator = DMatrix::from_fn(n, n, |i, j| rows[i][j] * MHZ);
                let collection = match &self.collection {
                    Some(c) => {
                        if c.len() != n || c.iter().any(|r| r.len() != n) {
                            return Err(DynamicsError::File(
                                "collection matrix shape mismatch".into(),
                            ));
                        }
                        DMatrix::from_fn(n, n, |i, j| c[i][j])
                    }
                    None => {
                        return Err(DynamicsError::File(
                            "explicit models need a `collection` matrix".into(),
                        ))
                    }
                };
                RateModel::new(generator, collection)
            }
            _ => Err(DynamicsError::File(
                "model file must carry either `template` or `generator_mhz`, not both".into(),
            )),
        }
    }
}

/// Parses a model description from JSON text.
pub fn model_from_json(text: &str) -> Result<RateModel, DynamicsError> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| DynamicsError::File(e.to_string()))?;
    file.build()
}

/// Loads a model description from a JSON file.
pub fn model_from_file(path: impl AsRef<Path>) -> Result<RateModel, DynamicsError> {
    let text = fs::read_to_string(path).map_err(|e| DynamicsError::File(e.to_string()))?;
    model_from_json(&text)
}
