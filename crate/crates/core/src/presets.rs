//! Experimental configurations: the single-pixel (0D) and imaging (2D) setups.
//!
//! Quoted gain values are crystal-integrated (units s); [`gain_per_length`] turns them into the
//! coefficient `g` (s/m) that enters `G_m = cosh²(g λ_m l_c)`.

use std::f64::consts::SQRT_2;

use crate::dispersion::{dispersion_params, CrystalConfig, DispersionParams};
use crate::error::Result;
use crate::jsa::{gaussian_approx_params, GaussianJsaParams, GridSpec, PumpSpectrum};
use crate::scene::{Arm, FilterModel};

/// Pump spectral amplitude FWHM (rad/s).
pub const PUMP_FWHM: f64 = 1.38e12;
/// Pump amplitude pulse duration (s).
pub const PUMP_DURATION: f64 = 2.96e-12;
/// Fitted gain of the single-pixel setup (quoted, s·m⁻¹ per crystal).
pub const G0_QUOTED: f64 = 8.4218e-13;
/// Fitted gain of the imaging setup.
pub const G2D_QUOTED: f64 = 5.963e-13;
/// Camera readout noise (counts).
pub const READOUT_SIGMA: f64 = 3.05;
/// Thermal input photons in the imaging experiment.
pub const N_THERMAL: f64 = 35.0;
/// Coherent input photons in the imaging experiment.
pub const N_COHERENT: f64 = 51.5;
/// Camera pixel area (m²).
pub const PIXEL_AREA: f64 = 66e-12;
/// Signal beam waist (m).
pub const BEAM_WAIST: f64 = 140e-6;
/// Default number of retained modes above the fundamental.
pub const M_MAX: usize = 40;
/// JSA grid points per axis.
pub const GRID_POINTS: usize = 1024;
/// Modes used for imaging predictions.
pub const IMAGING_MODES: usize = 10;

/// Input spectral amplitude FWHM matched to the pump intensity spectrum (rad/s).
pub fn input_fwhm() -> f64 {
    SQRT_2 * PUMP_FWHM
}

/// Per-length coefficient from a crystal-integrated gain value.
pub fn gain_per_length(quoted: f64, length_m: f64) -> f64 {
    quoted / length_m
}

/// First and second derivatives tabulated for 400 → 853 + 753 nm.
pub fn tabulated_853(crystal: &CrystalConfig) -> Result<DispersionParams> {
    let k = dispersion_params(crystal, crystal.theta_deg)?;
    Ok(DispersionParams {
        k1_p: 5.81385e-9,
        k1_s: 5.60459e-9,
        k1_i: 5.62645e-9,
        k2_p: 1.96116e-25,
        k2_s: 6.71907e-26,
        k2_i: 8.20217e-26,
        ..k
    })
}

/// First and second derivatives tabulated for 400 → 840 + 763.6 nm.
pub fn tabulated_840(crystal: &CrystalConfig) -> Result<DispersionParams> {
    let k = dispersion_params(crystal, crystal.theta_deg)?;
    Ok(DispersionParams {
        k1_p: 5.81385e-9,
        k1_s: 5.61079e-9,
        k1_i: 5.62757e-9,
        k2_p: 1.96116e-25,
        k2_s: 6.8984e-26,
        k2_i: 8.0428e-26,
        ..k
    })
}

/// Everything needed to go from crystal to detected photon statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Setup {
    pub crystal: CrystalConfig,
    pub dispersion: DispersionParams,
    pub pump: PumpSpectrum,
    /// Gain coefficient (s/m).
    pub g: f64,
    pub filter: FilterModel,
    pub arm: Arm,
    pub input_fwhm: f64,
    pub sigma: f64,
    pub m_max: usize,
    /// Points per frequency axis of the JSA grid.
    pub grid_points: usize,
}

impl Setup {
    /// 3 mm crystal, 853/753 nm, 13 nm filter at 749 nm.
    pub fn zero_d() -> Result<Self> {
        let crystal = CrystalConfig::bbo(853.0, 753.0, 3e-3, 29.01);
        Ok(Self {
            dispersion: tabulated_853(&crystal)?,
            pump: PumpSpectrum { fwhm: PUMP_FWHM, peak_amplitude: 1.0, duration_s: PUMP_DURATION },
            g: gain_per_length(G0_QUOTED, crystal.length_m),
            filter: FilterModel::band_nm(749.0, 13.0, 0.5, 1.0),
            arm: Arm::Idler,
            input_fwhm: input_fwhm(),
            sigma: READOUT_SIGMA,
            m_max: M_MAX,
            grid_points: GRID_POINTS,
            crystal,
        })
    }

    /// 2 mm crystal, 840/763.6 nm, narrow filter at 763.3 nm.
    pub fn two_d() -> Result<Self> {
        let crystal = CrystalConfig::bbo(840.0, 763.6, 2e-3, 29.14);
        Ok(Self {
            dispersion: tabulated_840(&crystal)?,
            pump: PumpSpectrum { fwhm: PUMP_FWHM, peak_amplitude: 1.0, duration_s: PUMP_DURATION },
            g: gain_per_length(G2D_QUOTED, crystal.length_m),
            filter: FilterModel::band_nm(763.3, 1.2, 0.2, 1.0),
            arm: Arm::Idler,
            input_fwhm: input_fwhm(),
            sigma: READOUT_SIGMA,
            m_max: M_MAX,
            grid_points: GRID_POINTS,
            crystal,
        })
    }

    pub fn gaussian_params(&self) -> GaussianJsaParams {
        gaussian_approx_params(&self.dispersion, self.crystal.length_m, &self.pump)
    }

    pub fn grid(&self) -> GridSpec {
        let spec =
            GridSpec::for_modes(&self.gaussian_params(), self.m_max, self.crystal.omega_s() - self.crystal.omega_i());
        GridSpec { n: self.grid_points, ..spec }
    }

    /// Carrier frequency of the detected arm (rad/s).
    pub fn detected_carrier(&self) -> f64 {
        match self.arm {
            Arm::Idler => self.crystal.omega_i(),
            Arm::Signal => self.crystal.omega_s(),
        }
    }

    /// Carrier frequency of the injected arm (rad/s).
    pub fn injected_carrier(&self) -> f64 {
        match self.arm {
            Arm::Idler => self.crystal.omega_s(),
            Arm::Signal => self.crystal.omega_i(),
        }
    }
}
