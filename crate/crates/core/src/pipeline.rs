//! Crystal-to-statistics chain for one [`Setup`].

use crate::error::{Error, Result};
use crate::jsa::{build_jsa, JsaGrid};
use crate::modes::{mode_gains, svd_modes, GainProfile, ModeBasis};
use crate::photonstats::{ModeInput, DEFAULT_MODE_N_MAX, DEFAULT_TOTAL_N_MAX};
use crate::presets::Setup;
use crate::scene::{mode_inputs, mode_overlap, mode_transmission, InputField, InputKind, VacuumModel};

/// Modes whose edge leakage is checked when a model is built.
pub const CHECKED_MODES: usize = 20;
/// Largest accepted edge-to-peak ratio of a checked mode.
pub const EDGE_LEAKAGE_LIMIT: f64 = 1e-3;

/// Modes, gains, filter transmissions and input overlaps of a setup.
#[derive(Debug, Clone)]
pub struct Model {
    pub setup: Setup,
    pub jsa: JsaGrid,
    pub basis: ModeBasis,
    pub gains: GainProfile,
    pub transmissions: Vec<f64>,
    /// Input-spectrum overlaps O_m.
    pub overlaps: Vec<f64>,
}

impl Model {
    pub fn build(setup: Setup) -> Result<Self> {
        setup.crystal.validate()?;
        setup.filter.validate()?;
        let jsa = build_jsa(&setup.dispersion, setup.crystal.length_m, &setup.pump, &setup.grid())?;
        let basis = svd_modes(&jsa, setup.m_max)?;
        for m in 0..basis.len().min(CHECKED_MODES + 1) {
            let leak = basis.edge_leakage(m);
            if leak > EDGE_LEAKAGE_LIMIT {
                return Err(Error::SupportTruncated(format!(
                    "mode {m} reaches {leak:.2e} of its peak at the grid edge"
                )));
            }
        }
        let gains = mode_gains(&basis, setup.g, setup.crystal.length_m)?;
        let transmissions = mode_transmission(&basis, &setup.filter, setup.detected_carrier(), setup.arm);
        let field = InputField { kind: InputKind::Coherent, power_w: 0.0, fwhm: setup.input_fwhm, waist_m: 0.0 };
        let overlaps = mode_overlap(&field, &basis, setup.arm);
        Ok(Self { setup, jsa, basis, gains, transmissions, overlaps })
    }

    /// Same model with a different gain coefficient.
    pub fn with_gain(&self, g: f64) -> Self {
        let mut out = self.clone();
        out.setup.g = g;
        out.gains = GainProfile::from_lambda(&self.basis.lambda, g, self.setup.crystal.length_m);
        out
    }

    /// `|O_m|²`.
    pub fn overlap_weights(&self) -> Vec<f64> {
        self.overlaps.iter().map(|o| o * o).collect()
    }

    /// Mode inputs of the first `modes` modes for `n_input` injected photons.
    pub fn inputs(&self, n_input: f64, kind: InputKind, modes: usize) -> Result<Vec<ModeInput>> {
        let k = modes.min(self.basis.len());
        mode_inputs(n_input, &self.overlaps[..k], &self.transmissions[..k], kind)
    }

    /// Gains restricted to the first `modes` modes.
    pub fn gains_for(&self, modes: usize) -> GainProfile {
        let k = modes.min(self.gains.len());
        GainProfile::from_lambda(&self.basis.lambda[..k], self.gains.g, self.gains.length_m)
    }

    pub fn vacuum_model(&self) -> VacuumModel {
        VacuumModel {
            lambda: self.basis.lambda.clone(),
            transmissions: self.transmissions.clone(),
            length_m: self.setup.crystal.length_m,
            sigma: self.setup.sigma,
            n_max_mode: DEFAULT_MODE_N_MAX,
            n_max_total: DEFAULT_TOTAL_N_MAX,
        }
    }
}
