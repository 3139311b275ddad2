//! Temporal modes of the JSA: numerical SVD, Hermite-Gauss forms and per-mode gains.

mod propagate;

use std::f64::consts::PI;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::dispersion::CrystalConfig;
use crate::error::{Error, Result};
use crate::jsa::{GaussianJsaParams, JsaGrid};
use crate::units::{um_from_omega, C};

pub use propagate::{magnus_transfer_matrix, propagate_transfer_matrix, MagnusComparison, TransferMatrix};

/// Singular values and paired modes sampled on the JSA axis.
///
/// Modes are normalized so that `Σ_k |ψ_m(Ω_k)|² dΩ = 1`; `psi` are idler modes (rows of M₁),
/// `phi` signal modes (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct ModeBasis {
    pub lambda: Vec<f64>,
    pub psi: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
    pub omega: Vec<f64>,
    pub d_omega: f64,
}

impl ModeBasis {
    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    pub fn m_max(&self) -> usize {
        self.lambda.len() - 1
    }

    /// `∫ a(Ω) b(Ω) dΩ` on the mode grid.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * self.d_omega
    }

    /// Keeps the first `count` modes.
    pub fn truncated(&self, count: usize) -> Self {
        let k = count.min(self.len());
        Self {
            lambda: self.lambda[..k].to_vec(),
            psi: self.psi[..k].to_vec(),
            phi: self.phi[..k].to_vec(),
            omega: self.omega.clone(),
            d_omega: self.d_omega,
        }
    }

    /// `Σ_m λ_m ψ_m(Ω_i) φ_m(Ω_s)`, row-major.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.omega.len();
        let mut out = vec![0.0; n * n];
        for m in 0..self.len() {
            for i in 0..n {
                let a = self.lambda[m] * self.psi[m][i];
                let row = &mut out[i * n..(i + 1) * n];
                for (o, p) in row.iter_mut().zip(&self.phi[m]) {
                    *o += a * p;
                }
            }
        }
        out
    }

    /// Largest end-point sample of mode `m` relative to its peak, for both arms.
    pub fn edge_leakage(&self, m: usize) -> f64 {
        let ratio = |v: &[f64]| {
            let peak = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            v[0].abs().max(v[v.len() - 1].abs()) / peak
        };
        ratio(&self.psi[m]).max(ratio(&self.phi[m]))
    }
}

/// SVD of the discretized kernel.
///
/// The operator `f ↦ ∫M₁(·,Ω′) f(Ω′) dΩ′` is the matrix `M₁·dΩ` acting on samples, so its
/// singular values are the continuous-kernel λ_m and the singular vectors become modes after
/// division by √dΩ. Each ψ_m is signed so that its largest-magnitude sample is positive; φ_m
/// carries the same sign flip so the product λψφ is unchanged.
pub fn svd_modes(jsa: &JsaGrid, m_max: usize) -> Result<ModeBasis> {
    let n = jsa.n();
    if m_max + 1 > n {
        return Err(Error::InvalidParameter(format!("m_max {m_max} exceeds grid size {n}")));
    }
    let dw = jsa.d_omega;
    let a = Mat::<f64>::from_fn(n, n, |i, j| jsa.values[i * n + j] * dw);
    let svd = a.thin_svd().map_err(|e| Error::InvalidParameter(format!("SVD failed: {e:?}")))?;
    let (u, s, v) = (svd.U(), svd.S(), svd.V());
    let scale = 1.0 / dw.sqrt();
    let mut lambda = Vec::with_capacity(m_max + 1);
    let mut psi = Vec::with_capacity(m_max + 1);
    let mut phi = Vec::with_capacity(m_max + 1);
    for m in 0..=m_max {
        lambda.push(s[m]);
        let mut p: Vec<f64> = (0..n).map(|i| u[(i, m)] * scale).collect();
        let mut q: Vec<f64> = (0..n).map(|i| v[(i, m)] * scale).collect();
        let peak = p.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if peak < 0.0 {
            p.iter_mut().for_each(|x| *x = -*x);
            q.iter_mut().for_each(|x| *x = -*x);
        }
        psi.push(p);
        phi.push(q);
    }
    if m_max > 0 && lambda[m_max] / lambda[0] > 0.999 {
        return Err(Error::BasisNotConverged(lambda[m_max] / lambda[0]));
    }
    Ok(ModeBasis { lambda, psi, phi, omega: jsa.omega.clone(), d_omega: dw })
}

/// `λ_m = √(2π)Δ₁Δ₂/(Δ₁+Δ₂)·|(Δ₁−Δ₂)/(Δ₁+Δ₂)|^m`.
pub fn analytic_singular_value(p: &GaussianJsaParams, m: usize) -> f64 {
    let (d1, d2) = (p.delta1, p.delta2);
    (2.0 * PI).sqrt() * d1 * d2 / (d1 + d2) * ((d1 - d2) / (d1 + d2)).abs().powi(m as i32)
}

/// Hermite-Gauss modes `2^{1/4}τ^{1/2}/√(m!2^mπ^{1/2})·e^{−τ²Ω²}H_m(√2τΩ)` on `omega`.
///
/// Evaluated through the normalized Hermite-function recurrence, which never forms m! or H_m.
pub fn analytic_modes(p: &GaussianJsaParams, m_max: usize, omega: &[f64]) -> ModeBasis {
    let n = omega.len();
    let d_omega = if n > 1 { omega[1] - omega[0] } else { 0.0 };
    let pre = (2f64.sqrt() * p.tau).sqrt();
    let mut modes = vec![vec![0.0; n]; m_max + 1];
    for (k, &w) in omega.iter().enumerate() {
        let xi = 2f64.sqrt() * p.tau * w;
        let mut h_prev = 0.0;
        let mut h = PI.powf(-0.25) * (-0.5 * xi * xi).exp();
        for (m, mode) in modes.iter_mut().enumerate() {
            mode[k] = pre * h;
            let next = (2.0 / (m + 1) as f64).sqrt() * xi * h - (m as f64 / (m + 1) as f64).sqrt() * h_prev;
            h_prev = h;
            h = next;
        }
    }
    ModeBasis {
        lambda: (0..=m_max).map(|m| analytic_singular_value(p, m)).collect(),
        psi: modes.clone(),
        phi: modes,
        omega: omega.to_vec(),
        d_omega,
    }
}

/// Per-mode Bogoliubov gains `G_m = cosh²(g λ_m l_c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainProfile {
    /// Gain coefficient (s/m).
    pub g: f64,
    pub length_m: f64,
    pub gains: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub x: Vec<f64>,
}

impl GainProfile {
    pub fn from_lambda(lambda: &[f64], g: f64, length_m: f64) -> Self {
        let r: Vec<f64> = lambda.iter().map(|l| g * l * length_m).collect();
        Self {
            g,
            length_m,
            gains: r.iter().map(|r| r.cosh().powi(2)).collect(),
            u: r.iter().map(|r| r.cosh()).collect(),
            v: r.iter().map(|r| r.sinh()).collect(),
            x: r.iter().map(|r| r.tanh()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    /// Mean fluorescence photons per mode, `G_m − 1 = sinh²(gλ_m l_c)`.
    pub fn fluorescence(&self) -> Vec<f64> {
        self.v.iter().map(|v| v * v).collect()
    }
}

pub fn mode_gains(basis: &ModeBasis, g: f64, length_m: f64) -> Result<GainProfile> {
    if !(g >= 0.0) {
        return Err(Error::InvalidParameter(format!("gain coefficient must be non-negative, got {g}")));
    }
    Ok(GainProfile::from_lambda(&basis.lambda, g, length_m))
}

fn gain_per_amplitude(config: &CrystalConfig) -> Result<f64> {
    let (ws, wi) = (config.omega_s(), config.omega_i());
    let ns = config.ordinary.index(um_from_omega(ws))?;
    let ni = config.ordinary.index(um_from_omega(wi))?;
    Ok(config.chi2 / 2.0 * (ws * wi / (C * C * ns * ni)).sqrt())
}

/// `g = |A⁰_p|·(χ⁽²⁾/2)·√(ω_s ω_i/(c² n_s n_i))`.
pub fn gain_coefficient(config: &CrystalConfig, peak_amplitude: f64) -> Result<f64> {
    Ok(peak_amplitude.abs() * gain_per_amplitude(config)?)
}

/// Pump peak amplitude that produces the gain coefficient `g`.
pub fn implied_pump_amplitude(config: &CrystalConfig, g: f64) -> Result<f64> {
    Ok(g / gain_per_amplitude(config)?)
}
