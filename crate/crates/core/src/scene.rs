//! Spectral filter, input fields, mode overlaps and transmissions, input calibration,
//! per-mode contributions and the fluorescence gain fit.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modes::{GainProfile, ModeBasis};
use crate::photonstats::{multimode_law, readout_bin_probabilities, InputState, ModeInput};
use crate::units::{bandwidth_nm_to_omega, omega_from_nm, HBAR};

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Band-pass transmission built from a high-pass and a low-pass sigmoid in angular frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterModel {
    /// Lower band edge (rad/s).
    pub low_edge: f64,
    /// Width of the lower sigmoid (rad/s).
    pub low_width: f64,
    /// Upper band edge (rad/s).
    pub high_edge: f64,
    pub high_width: f64,
    pub peak: f64,
}

impl FilterModel {
    /// Band of `width_nm` centered at `center_nm` with sigmoid edges `edge_nm` wide.
    pub fn band_nm(center_nm: f64, width_nm: f64, edge_nm: f64, peak: f64) -> Self {
        let w = bandwidth_nm_to_omega(center_nm, edge_nm);
        Self {
            low_edge: omega_from_nm(center_nm + 0.5 * width_nm),
            low_width: w,
            high_edge: omega_from_nm(center_nm - 0.5 * width_nm),
            high_width: w,
            peak,
        }
    }

    /// Transmission independent of frequency.
    pub fn flat(peak: f64) -> Self {
        Self { low_edge: f64::NEG_INFINITY, low_width: 1.0, high_edge: f64::INFINITY, high_width: 1.0, peak }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak > 0.0 && self.peak <= 1.0) {
            return Err(Error::InvalidParameter(format!("filter peak transmission {} outside (0, 1]", self.peak)));
        }
        if !(self.low_width > 0.0 && self.high_width > 0.0) {
            return Err(Error::InvalidParameter("filter edge widths must be positive".into()));
        }
        Ok(())
    }

    /// `T(ω)` at absolute angular frequency ω.
    pub fn transmission(&self, omega: f64) -> f64 {
        self.peak
            * sigmoid((omega - self.low_edge) / self.low_width)
            * sigmoid((self.high_edge - omega) / self.high_width)
    }
}

/// Arm seen by the detector; the input signal is injected on the other one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    /// Detected modes are ψ (rows of M₁), input overlaps use φ.
    #[default]
    Idler,
    /// Detected modes are φ, input overlaps use ψ.
    Signal,
}

impl Arm {
    pub fn detected<'a>(&self, basis: &'a ModeBasis) -> &'a [Vec<f64>] {
        match self {
            Arm::Idler => &basis.psi,
            Arm::Signal => &basis.phi,
        }
    }

    pub fn injected<'a>(&self, basis: &'a ModeBasis) -> &'a [Vec<f64>] {
        match self {
            Arm::Idler => &basis.phi,
            Arm::Signal => &basis.psi,
        }
    }
}

/// `T_m = ∫|mode_m(Ω)|² T(ω_c + Ω) dΩ` over the detected modes.
pub fn mode_transmission(basis: &ModeBasis, filter: &FilterModel, carrier: f64, arm: Arm) -> Vec<f64> {
    let t: Vec<f64> = basis.omega.iter().map(|w| filter.transmission(carrier + w)).collect();
    arm.detected(basis)
        .iter()
        .map(|mode| (mode.iter().zip(&t).map(|(m, t)| m * m * t).sum::<f64>() * basis.d_omega).clamp(0.0, 1.0))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    Vacuum,
    Coherent,
    Thermal,
}

/// Input signal pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputField {
    pub kind: InputKind,
    /// Average power (W).
    pub power_w: f64,
    /// Spectral amplitude FWHM (rad/s).
    pub fwhm: f64,
    /// Beam waist ω_r (m).
    pub waist_m: f64,
}

impl InputField {
    pub fn validate(&self) -> Result<()> {
        if !(self.power_w >= 0.0) || !(self.fwhm > 0.0) {
            return Err(Error::InvalidParameter("input power must be >= 0 and spectral width > 0".into()));
        }
        Ok(())
    }

    /// L²-normalized Gaussian spectral amplitude sampled on `omega`.
    pub fn spectrum(&self, omega: &[f64], d_omega: f64) -> Vec<f64> {
        let mut a: Vec<f64> = omega.iter().map(|w| (-4.0 * LN_2 * w * w / (self.fwhm * self.fwhm)).exp()).collect();
        let norm = (a.iter().map(|v| v * v).sum::<f64>() * d_omega).sqrt();
        a.iter_mut().for_each(|v| *v /= norm);
        a
    }
}

/// `O_m = ∫A_s(Ω) φ_m(Ω) dΩ` with `A_s` L²-normalized.
pub fn mode_overlap(input: &InputField, basis: &ModeBasis, arm: Arm) -> Vec<f64> {
    let a = input.spectrum(&basis.omega, basis.d_omega);
    arm.injected(basis).iter().map(|mode| basis.inner(&a, mode)).collect()
}

/// Photons per pulse on one pixel at the beam center, `2P_sΔ_tS/(ħω_s ω_r²π)`.
pub fn input_photon_number(power_w: f64, pulse_s: f64, pixel_area_m2: f64, waist_m: f64, omega_s: f64) -> f64 {
    2.0 * power_w * pulse_s * pixel_area_m2 / (HBAR * omega_s * waist_m * waist_m * PI)
}

/// Per-mode inputs `|α_m|² = N_input|O_m|²` (or thermal `n̄_m`) with their transmissions.
pub fn mode_inputs(n_input: f64, overlaps: &[f64], transmissions: &[f64], kind: InputKind) -> Result<Vec<ModeInput>> {
    if overlaps.len() != transmissions.len() {
        return Err(Error::InvalidParameter("overlap and transmission counts differ".into()));
    }
    let weight: f64 = overlaps.iter().map(|o| o * o).sum();
    if weight > 1.0 + 1e-6 {
        return Err(Error::InvalidParameter(format!("overlap weights sum to {weight} > 1")));
    }
    Ok(overlaps
        .iter()
        .zip(transmissions)
        .map(|(o, &t)| {
            let n = n_input * o * o;
            let state = match kind {
                _ if n_input == 0.0 => InputState::Vacuum,
                InputKind::Vacuum => InputState::Vacuum,
                InputKind::Coherent => InputState::Coherent { alpha2: n },
                InputKind::Thermal => InputState::Thermal { nbar: n },
            };
            ModeInput { state, transmission: t }
        })
        .collect())
}

/// `C_m = N^m_int / Σ N^m_int` with `N^m_int = T_m N_input|O_m|²(G_m−1)`.
pub fn mode_contributions(inputs: &[ModeInput], gains: &GainProfile) -> Result<Vec<f64>> {
    let n: Vec<f64> = inputs.iter().zip(&gains.gains).map(|(i, g)| i.transmission * i.photons() * (g - 1.0)).collect();
    let total: f64 = n.iter().sum();
    if !(total > 0.0) {
        return Err(Error::NoSignal);
    }
    Ok(n.iter().map(|v| v / total).collect())
}

/// Histogram of camera counts in unit-width bins centered on integers.
#[derive(Debug, Clone, PartialEq)]
pub struct CountHistogram {
    pub first_bin: i64,
    pub counts: Vec<f64>,
}

impl CountHistogram {
    pub fn from_samples(samples: &[f64]) -> Self {
        let bins: Vec<i64> = samples.iter().map(|s| s.round() as i64).collect();
        let lo = bins.iter().copied().min().unwrap_or(0);
        let hi = bins.iter().copied().max().unwrap_or(0);
        let mut counts = vec![0.0; (hi - lo + 1) as usize];
        for b in bins {
            counts[(b - lo) as usize] += 1.0;
        }
        Self { first_bin: lo, counts }
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn normalized(&self) -> Vec<f64> {
        let t = self.total();
        self.counts.iter().map(|c| c / t).collect()
    }
}

/// Vacuum-fluorescence model whose only free parameter is the gain coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct VacuumModel {
    pub lambda: Vec<f64>,
    pub transmissions: Vec<f64>,
    pub length_m: f64,
    pub sigma: f64,
    pub n_max_mode: usize,
    pub n_max_total: usize,
}

impl VacuumModel {
    /// Probability of each histogram bin; the two end bins absorb the mass outside the range.
    pub fn bin_probabilities(&self, g: f64, first_bin: i64, bins: usize) -> Result<Vec<f64>> {
        let gains = GainProfile::from_lambda(&self.lambda, g, self.length_m);
        let inputs: Vec<ModeInput> = self.transmissions.iter().map(|&t| ModeInput::vacuum(t)).collect();
        let law = multimode_law(&inputs, &gains, self.n_max_mode, self.n_max_total)?;
        let mut p = readout_bin_probabilities(&law, self.sigma, first_bin, bins);
        let inside: f64 = p.iter().sum();
        let below = readout_bin_probabilities(&law, self.sigma, first_bin - 200, 200).iter().sum::<f64>();
        p[0] += below;
        let last = p.len() - 1;
        p[last] += (1.0 - inside - below).max(0.0);
        Ok(p)
    }
}

/// Contiguous bin groups with expected count at least 5; sparse tail bins are pooled into
/// their inner neighbours.
fn merge_groups(expected: &[f64]) -> Vec<(usize, usize)> {
    let mut groups = Vec::new();
    let mut start = 0;
    let mut acc = 0.0;
    for (k, e) in expected.iter().enumerate() {
        acc += e;
        if acc >= 5.0 {
            groups.push((start, k + 1));
            start = k + 1;
            acc = 0.0;
        }
    }
    if start < expected.len() {
        match groups.last_mut() {
            Some(last) => last.1 = expected.len(),
            None => groups.push((0, expected.len())),
        }
    }
    groups
}

fn grouped_nll(observed: &[f64], probs: &[f64], groups: &[(usize, usize)]) -> f64 {
    groups
        .iter()
        .map(|&(a, b)| {
            let o: f64 = observed[a..b].iter().sum();
            let p: f64 = probs[a..b].iter().sum::<f64>().max(1e-300);
            -o * p.ln()
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainFit {
    /// Gain coefficient (s/m).
    pub g: f64,
    /// Negative log-likelihood at the optimum.
    pub nll: f64,
    pub evaluations: usize,
}

/// Maximum-likelihood gain coefficient for an observed vacuum histogram.
///
/// Golden-section search on the binned multinomial likelihood between `bounds`, to 1e-4
/// relative in g. Bins are pooled so each group expects at least 5 counts; the pooling is
/// decided at the bracket midpoint and refined once at the first optimum.
pub fn fit_gain(observed: &CountHistogram, model: &VacuumModel, bounds: (f64, f64)) -> Result<GainFit> {
    let (lo0, hi0) = bounds;
    if !(lo0 >= 0.0 && hi0 > lo0) {
        return Err(Error::InvalidParameter(format!("invalid gain bounds {bounds:?}")));
    }
    let n_obs = observed.total();
    if !(n_obs > 0.0) {
        return Err(Error::InvalidParameter("empty histogram".into()));
    }
    let bins = observed.counts.len();
    let mut evaluations = 0;
    let groups_at = |g: f64| -> Result<Vec<(usize, usize)>> {
        let p = model.bin_probabilities(g, observed.first_bin, bins)?;
        Ok(merge_groups(&p.iter().map(|v| v * n_obs).collect::<Vec<_>>()))
    };
    let mut groups = groups_at(0.5 * (lo0 + hi0))?;
    let mut best = (0.0, 0.0);
    for _pass in 0..2 {
        let mut nll = |g: f64| -> Result<f64> {
            evaluations += 1;
            let p = model.bin_probabilities(g, observed.first_bin, bins)?;
            Ok(grouped_nll(&observed.counts, &p, &groups))
        };
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (lo0, hi0);
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let (mut fc, mut fd) = (nll(c)?, nll(d)?);
        while (b - a) > 1e-4 * 0.5 * (a + b) {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = nll(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = nll(d)?;
            }
        }
        let g = 0.5 * (a + b);
        best = (g, nll(g)?);
        groups = groups_at(g)?;
    }
    let (g, nll) = best;
    let tol = 1e-3 * g.max(f64::MIN_POSITIVE);
    if (g - lo0).abs() < tol || (hi0 - g).abs() < tol {
        return Err(Error::BoundarySolution(g));
    }
    Ok(GainFit { g, nll, evaluations })
}
