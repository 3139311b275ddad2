//! Pump spectrum, phase mismatch and the joint spectral amplitude on a frequency grid.

use std::f64::consts::{LN_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::DispersionParams;
use crate::error::{Error, Result};

/// Gaussian pump spectrum normalized to unit peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpSpectrum {
    /// Spectral amplitude FWHM Δ_ω (rad/s).
    pub fwhm: f64,
    /// Peak spectral amplitude A⁰_p.
    pub peak_amplitude: f64,
    /// Amplitude FWHM of the pulse in time (s).
    pub duration_s: f64,
}

impl PumpSpectrum {
    pub fn new(fwhm: f64) -> Self {
        Self { fwhm, peak_amplitude: 1.0, duration_s: 0.0 }
    }

    pub fn amplitude(&self, omega_sum: f64) -> f64 {
        pump_amplitude(omega_sum, self)
    }
}

/// `A_p(Ω_i+Ω_s) = exp(−4 ln2 (Ω_i+Ω_s)²/Δ_ω²)`.
pub fn pump_amplitude(omega_sum: f64, pump: &PumpSpectrum) -> f64 {
    (-4.0 * LN_2 * omega_sum * omega_sum / (pump.fwhm * pump.fwhm)).exp()
}

/// Pulse durations derived from an 800 nm intensity autocorrelation trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseDurations {
    /// Intensity FWHM of the fundamental (s).
    pub intensity_fundamental: f64,
    /// Intensity FWHM of the doubled pulse (s).
    pub intensity_doubled: f64,
    /// Field-amplitude FWHM of the doubled pulse (s).
    pub amplitude_doubled: f64,
}

/// Gaussian deconvolution factor of an intensity autocorrelation.
pub const GAUSSIAN_DECONVOLUTION: f64 = 0.707;

pub fn pulse_durations(autocorrelation_fwhm_s: f64) -> PulseDurations {
    let intensity_fundamental = GAUSSIAN_DECONVOLUTION * autocorrelation_fwhm_s;
    let intensity_doubled = intensity_fundamental / 2f64.sqrt();
    PulseDurations { intensity_fundamental, intensity_doubled, amplitude_doubled: 2f64.sqrt() * intensity_doubled }
}

/// Pump spectrum from an autocorrelation width; the spectral width is the measured one,
/// not the Fourier limit.
pub fn pump_from_autocorrelation(autocorrelation_fwhm_s: f64, fwhm_omega: f64) -> Result<PumpSpectrum> {
    if !(autocorrelation_fwhm_s > 0.0) || !(fwhm_omega > 0.0) {
        return Err(Error::InvalidParameter("pulse widths must be positive".into()));
    }
    Ok(PumpSpectrum {
        fwhm: fwhm_omega,
        peak_amplitude: 1.0,
        duration_s: pulse_durations(autocorrelation_fwhm_s).amplitude_doubled,
    })
}

/// Fourier-limited spectral width `0.44·2π/Δ_t` of a Gaussian pulse (rad/s).
pub fn fourier_limited_bandwidth(duration_s: f64) -> f64 {
    0.44 * 2.0 * PI / duration_s
}

/// Second-order Taylor expansion of the wavevector mismatch about the carriers (m⁻¹).
pub fn phase_mismatch(omega_i: f64, omega_s: f64, d: &DispersionParams) -> f64 {
    let sum = omega_i + omega_s;
    let first = d.k1_p * sum - d.k1_s * omega_s - d.k1_i * omega_i;
    let second = d.k2_p * sum * sum - d.k2_s * omega_s * omega_s - d.k2_i * omega_i * omega_i;
    first + 0.5 * second
}

/// `sin(x)/x`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Widths of the bivariate Gaussian approximation of the JSA.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianJsaParams {
    /// Width along Ω_i = Ω_s (rad/s).
    pub delta1: f64,
    /// Width along Ω_i = −Ω_s (rad/s).
    pub delta2: f64,
    /// Phase-matching contribution to Δ₁ (rad/s).
    pub delta_pm: f64,
    /// `1/√(Δ₁Δ₂)` (s).
    pub tau: f64,
}

impl GaussianJsaParams {
    pub fn from_widths(delta1: f64, delta2: f64) -> Self {
        Self { delta1, delta2, delta_pm: f64::INFINITY, tau: 1.0 / (delta1 * delta2).sqrt() }
    }

    /// `exp(−(Ω_i+Ω_s)²/2Δ₁²)·exp(−(Ω_i−Ω_s)²/2Δ₂²)`.
    pub fn kernel(&self, omega_i: f64, omega_s: f64) -> f64 {
        let p = omega_i + omega_s;
        let m = omega_i - omega_s;
        (-p * p / (2.0 * self.delta1 * self.delta1) - m * m / (2.0 * self.delta2 * self.delta2)).exp()
    }
}

/// Gaussian approximation using `sinc(x) ≈ exp(−x²/5)`.
pub fn gaussian_approx_params(d: &DispersionParams, length_m: f64, pump: &PumpSpectrum) -> GaussianJsaParams {
    let l2 = length_m * length_m;
    let inv_pm2 = (2.0 * d.k1_p - d.k1_s - d.k1_i).powi(2) * l2 / 40.0;
    let inv_d1_2 = 8.0 * LN_2 / (pump.fwhm * pump.fwhm) + inv_pm2;
    let inv_d2_2 = (d.k1_i - d.k1_s).powi(2) * l2 / 40.0;
    let delta1 = inv_d1_2.powf(-0.5);
    let delta2 = inv_d2_2.powf(-0.5);
    GaussianJsaParams { delta1, delta2, delta_pm: inv_pm2.powf(-0.5), tau: 1.0 / (delta1 * delta2).sqrt() }
}

/// Uniform symmetric frequency axis `[−R, R]` with `n` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    /// R (rad/s).
    pub half_width: f64,
}

impl GridSpec {
    /// Default grid for modes up to `m_max`: 2.5·√(Δ₁Δ₂)·√(m_max+1), capped at half the
    /// signal–idler carrier separation so the exchanged phase-matching lobe stays outside.
    pub fn for_modes(params: &GaussianJsaParams, m_max: usize, carrier_separation: f64) -> Self {
        let mut r = 2.5 * (params.delta1 * params.delta2).sqrt() * ((m_max + 1) as f64).sqrt();
        if carrier_separation.abs() > 0.0 {
            r = r.min(0.5 * carrier_separation.abs());
        }
        Self { n: 1024, half_width: r }
    }

    pub fn axis(&self) -> Vec<f64> {
        let step = self.step();
        (0..self.n).map(|k| -self.half_width + k as f64 * step).collect()
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / (self.n - 1) as f64
    }
}

/// Discretized kernel `M₁[i][j] = M₁(Ω_i = Ω[i], Ω_s = Ω[j])`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct JsaGrid {
    pub omega: Vec<f64>,
    pub d_omega: f64,
    pub values: Vec<f64>,
}

impl JsaGrid {
    /// Samples an arbitrary kernel `f(Ω_i, Ω_s)`.
    pub fn from_fn<F>(spec: &GridSpec, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        if spec.n < 8 || !(spec.half_width > 0.0) {
            return Err(Error::InvalidParameter(format!("grid needs n >= 8 and R > 0, got {spec:?}")));
        }
        let omega = spec.axis();
        let n = spec.n;
        let mut values = vec![0.0; n * n];
        values.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = f(omega[i], omega[j]);
            }
        });
        Ok(Self { d_omega: spec.step(), omega, values })
    }

    pub fn n(&self) -> usize {
        self.omega.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n() + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest boundary sample relative to the largest sample.
    pub fn boundary_ratio(&self) -> f64 {
        let n = self.n();
        let mut b = 0.0f64;
        for k in 0..n {
            b = b.max(self.get(0, k).abs()).max(self.get(n - 1, k).abs());
            b = b.max(self.get(k, 0).abs()).max(self.get(k, n - 1).abs());
        }
        b / self.max_abs()
    }
}

/// `M₁(Ω_i,Ω_s) = A_p(Ω_i+Ω_s)·sinc(Δ(Ω_i,Ω_s)·l_c/2)` on the grid.
///
/// Only the pump envelope is checked here (below 1e-6 at R). The sinc stripe bends toward
/// the exchanged lobe and does not decay at the edge, so truncation of the stripe is judged
/// on the modes instead (see [`crate::modes::ModeBasis::edge_leakage`]).
pub fn build_jsa(d: &DispersionParams, length_m: f64, pump: &PumpSpectrum, spec: &GridSpec) -> Result<JsaGrid> {
    if spec.n < 256 {
        return Err(Error::InvalidParameter(format!("JSA grid needs at least 256 points, got {}", spec.n)));
    }
    let r = spec.half_width;
    let edge = pump_amplitude(r, pump);
    if edge >= 1e-6 {
        return Err(Error::SupportTruncated(format!("pump envelope {edge:e} at the grid edge")));
    }
    let half = length_m / 2.0;
    JsaGrid::from_fn(spec, |wi, ws| pump_amplitude(wi + ws, pump) * sinc(phase_mismatch(wi, ws, d) * half))
}
