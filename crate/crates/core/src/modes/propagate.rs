//! Direct z-ordered propagation of the coupled-mode equations, used to validate the
//! first-order Magnus map.

use faer::{c64, Mat, MatRef};

use crate::dispersion::DispersionParams;
use crate::error::{Error, Result};
use crate::jsa::{phase_mismatch, pump_amplitude, sinc, GridSpec, PumpSpectrum};

/// Linear map from input to output of `(a_s(Ω), a_i†(Ω))` on a `2N` grid.
#[derive(Debug, Clone)]
pub struct TransferMatrix {
    pub matrix: Mat<c64>,
    /// Number of z-steps (0 for the Magnus map).
    pub steps: usize,
}

impl TransferMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Largest photon-number amplification, `σ_max(T_ss)²`.
    pub fn peak_amplification(&self) -> f64 {
        let n = self.dim() / 2;
        let block = self.matrix.as_ref().submatrix(0, 0, n, n);
        let s = block.singular_values().expect("SVD of transfer block");
        s[0] * s[0]
    }

    /// `‖self − other‖₂ / ‖other‖₂`.
    pub fn relative_distance(&self, other: &TransferMatrix) -> f64 {
        let diff = &self.matrix - &other.matrix;
        spectral_norm(diff.as_ref()) / spectral_norm(other.matrix.as_ref())
    }
}

fn spectral_norm(a: MatRef<'_, c64>) -> f64 {
    a.singular_values().expect("SVD for operator norm")[0]
}

/// `exp(t·[[0, K], [K^H, 0]])` through the SVD `K = UΣV^H`.
fn block_exp(k: &Mat<c64>, t: f64) -> Mat<c64> {
    let n = k.nrows();
    let svd = k.svd().expect("SVD of coupling kernel");
    let (u, s, v) = (svd.U(), svd.S(), svd.V());
    let ch: Vec<f64> = (0..n).map(|m| (t * s[m].re).cosh()).collect();
    let sh: Vec<f64> = (0..n).map(|m| (t * s[m].re).sinh()).collect();
    let scaled = |a: MatRef<'_, c64>, w: &[f64]| Mat::<c64>::from_fn(n, n, |i, j| a[(i, j)] * w[j]);
    let u_ch = scaled(u, &ch);
    let u_sh = scaled(u, &sh);
    let v_ch = scaled(v, &ch);
    let v_sh = scaled(v, &sh);
    let mut out = Mat::<c64>::zeros(2 * n, 2 * n);
    out.as_mut().submatrix_mut(0, 0, n, n).copy_from(&u_ch * u.adjoint());
    out.as_mut().submatrix_mut(0, n, n, n).copy_from(&u_sh * v.adjoint());
    out.as_mut().submatrix_mut(n, 0, n, n).copy_from(&v_sh * u.adjoint());
    out.as_mut().submatrix_mut(n, n, n, n).copy_from(&v_ch * v.adjoint());
    out
}

struct Kernel {
    amp: Vec<f64>,
    delta: Vec<f64>,
    n: usize,
    d_omega: f64,
}

impl Kernel {
    fn new(d: &DispersionParams, pump: &PumpSpectrum, spec: &GridSpec) -> Self {
        let w = spec.axis();
        let n = spec.n;
        let mut amp = Vec::with_capacity(n * n);
        let mut delta = Vec::with_capacity(n * n);
        for &wi in &w {
            for &ws in &w {
                amp.push(pump_amplitude(wi + ws, pump));
                delta.push(phase_mismatch(wi, ws, d));
            }
        }
        Self { amp, delta, n, d_omega: spec.step() }
    }

    fn at(&self, z: f64) -> Mat<c64> {
        let n = self.n;
        Mat::<c64>::from_fn(n, n, |i, j| {
            let k = i * n + j;
            c64::from_polar(self.amp[k], self.delta[k] * z)
        })
    }
}

fn midpoint_product(kernel: &Kernel, g: f64, length_m: f64, steps: usize) -> Mat<c64> {
    let h = length_m / steps as f64;
    let mut y = Mat::<c64>::identity(2 * kernel.n, 2 * kernel.n);
    for s in 0..steps {
        let z = -0.5 * length_m + (s as f64 + 0.5) * h;
        let e = block_exp(&kernel.at(z), h * g * kernel.d_omega);
        y = &e * &y;
    }
    y
}

/// Midpoint-rule integration of `dξ/dz = g∫K(z) ξ` over `[−l_c/2, l_c/2]` with
/// `K = A_p e^{iΔz}`. The step count doubles from `initial_steps` until halving the step
/// changes the map by less than 1e-6 in relative operator norm. Intended for
/// `g λ₀ l_c ≤ 2` on small grids.
pub fn propagate_transfer_matrix(
    d: &DispersionParams,
    length_m: f64,
    pump: &PumpSpectrum,
    spec: &GridSpec,
    g: f64,
    initial_steps: usize,
) -> Result<TransferMatrix> {
    let kernel = Kernel::new(d, pump, spec);
    let mut steps = initial_steps.max(1);
    let mut prev = TransferMatrix { matrix: midpoint_product(&kernel, g, length_m, steps), steps };
    let mut change = f64::INFINITY;
    while steps < 1 << 14 {
        steps *= 2;
        let cur = TransferMatrix { matrix: midpoint_product(&kernel, g, length_m, steps), steps };
        change = cur.relative_distance(&prev);
        if change < 1e-6 {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::PropagationNotConverged(change))
}

/// First-order Magnus map `exp(g l_c dΩ [[0, M₁], [M₁ᵀ, 0]])`.
pub fn magnus_transfer_matrix(
    d: &DispersionParams,
    length_m: f64,
    pump: &PumpSpectrum,
    spec: &GridSpec,
    g: f64,
) -> TransferMatrix {
    let w = spec.axis();
    let half = length_m / 2.0;
    let m = Mat::<c64>::from_fn(spec.n, spec.n, |i, j| {
        c64::new(pump_amplitude(w[i] + w[j], pump) * sinc(phase_mismatch(w[i], w[j], d) * half), 0.0)
    });
    TransferMatrix { matrix: block_exp(&m, g * length_m * spec.step()), steps: 0 }
}

/// Direct propagation against the Magnus map at one gain.
#[derive(Debug, Clone, Copy)]
pub struct MagnusComparison {
    pub operator_rel_err: f64,
    pub amplification_direct: f64,
    pub amplification_magnus: f64,
    pub steps: usize,
}

impl MagnusComparison {
    pub fn run(d: &DispersionParams, length_m: f64, pump: &PumpSpectrum, spec: &GridSpec, g: f64) -> Result<Self> {
        let direct = propagate_transfer_matrix(d, length_m, pump, spec, g, 16)?;
        let magnus = magnus_transfer_matrix(d, length_m, pump, spec, g);
        Ok(Self {
            operator_rel_err: direct.relative_distance(&magnus),
            amplification_direct: direct.peak_amplification(),
            amplification_magnus: magnus.peak_amplification(),
            steps: direct.steps,
        })
    }
}
