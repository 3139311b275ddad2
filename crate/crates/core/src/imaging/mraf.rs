use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::letter_a_mask;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MrafOptions {
    /// Mixing parameter m: weight of the target amplitude in the signal region.
    pub mixing: f64,
    pub iterations: usize,
    /// Seed of the random initial phase; `None` starts from a flat phase.
    pub seed: Option<u64>,
    /// 1/e² intensity radius of the illuminating beam as a fraction of the SLM side.
    pub beam_waist: f64,
    /// Final error above which the run is flagged as stalled.
    pub stall_threshold: f64,
}

impl Default for MrafOptions {
    fn default() -> Self {
        Self { mixing: 0.4, iterations: 100, seed: Some(1), beam_waist: 0.15, stall_threshold: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MrafResult {
    pub n: usize,
    /// SLM phase in `[0, 2π)`, row-major.
    pub phase: Vec<f64>,
    /// Image-plane intensity of the final mask, centered, normalized to unit total power.
    pub intensity: Vec<f64>,
    /// Signal-region error before each update and after the last one.
    pub errors: Vec<f64>,
    /// Fraction of the power landing in the signal region.
    pub efficiency: f64,
    pub stalled: bool,
}

impl MrafResult {
    pub fn final_error(&self) -> f64 {
        *self.errors.last().unwrap()
    }
}

/// Unitary 2D FFT on an `n × n` row-major buffer.
struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    fn run(&self, buf: &mut [Complex64], inverse: bool) {
        let fft = if inverse { &self.inverse } else { &self.forward };
        fft.process(buf);
        transpose(buf, self.n);
        fft.process(buf);
        transpose(buf, self.n);
        let scale = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
    }
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// Moves the zero frequency between the grid center and index 0 (self-inverse for even n).
fn shift<T: Copy>(v: &[T], n: usize) -> Vec<T> {
    let h = n / 2;
    (0..n * n).map(|k| v[((k / n + h) % n) * n + (k % n + h) % n]).collect()
}

/// Normalized Gaussian illumination amplitude centered on the SLM.
pub fn gaussian_beam(n: usize, waist: f64) -> Vec<f64> {
    let mut a: Vec<f64> = (0..n * n)
        .map(|k| {
            let x = ((k % n) as f64 - n as f64 / 2.0) / n as f64;
            let y = ((k / n) as f64 - n as f64 / 2.0) / n as f64;
            (-(x * x + y * y) / (waist * waist)).exp()
        })
        .collect();
    let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    a.iter_mut().for_each(|v| *v /= norm);
    a
}

/// Bounding box of the nonzero target pixels grown by `pad` pixels on every side.
pub fn signal_region_box(target: &[f64], n: usize, pad: usize) -> Vec<bool> {
    let (mut x0, mut x1, mut y0, mut y1) = (n, 0, n, 0);
    for (k, &t) in target.iter().enumerate() {
        if t > 0.0 {
            let (x, y) = (k % n, k / n);
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    let mut sr = vec![false; n * n];
    if x0 > x1 {
        return sr;
    }
    let (x0, y0) = (x0.saturating_sub(pad), y0.saturating_sub(pad));
    let (x1, y1) = ((x1 + pad).min(n - 1), (y1 + pad).min(n - 1));
    for y in y0..=y1 {
        for x in x0..=x1 {
            sr[y * n + x] = true;
        }
    }
    sr
}

/// Bundled "A" target on an `n × n` grid, unit total intensity, with its padded bounding box
/// as signal region.
pub fn letter_a_target(n: usize) -> (Vec<f64>, Vec<bool>) {
    let mask = letter_a_mask(n, n, 0.5);
    let lit = mask.iter().filter(|&&m| m).count() as f64;
    let target: Vec<f64> = mask.iter().map(|&m| if m { 1.0 / lit } else { 0.0 }).collect();
    let sr = signal_region_box(&target, n, n / 20);
    (target, sr)
}

/// RMS deviation of the signal-region intensity from the target, after scaling both to
/// the same signal-region power, relative to the RMS target.
fn region_error(intensity: &[f64], target: &[f64], sr: &[bool]) -> f64 {
    let (mut pi, mut pt) = (0.0, 0.0);
    for k in 0..sr.len() {
        if sr[k] {
            pi += intensity[k];
            pt += target[k];
        }
    }
    let s = if pi > 0.0 { pt / pi } else { 0.0 };
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..sr.len() {
        if sr[k] {
            let d = intensity[k] * s - target[k];
            num += d * d;
            den += target[k] * target[k];
        }
    }
    (num / den).sqrt()
}

/// Mixed-region amplitude freedom phase retrieval.
///
/// `target` and `signal_region` are centered image-plane maps. Each iteration propagates the
/// SLM field to the image plane, replaces the amplitude by `m·√target` inside the signal
/// region and `(1−m)·|field|` outside while keeping the phase, and propagates back keeping
/// only the phase.
pub fn mraf_phase_mask(target: &[f64], signal_region: &[bool], n: usize, opts: &MrafOptions) -> Result<MrafResult> {
    if !n.is_power_of_two() || n < 2 {
        return Err(Error::InvalidParameter(format!("grid side {n} is not a power of two")));
    }
    if target.len() != n * n || signal_region.len() != n * n {
        return Err(Error::InvalidParameter(format!("target and signal region must have {} entries", n * n)));
    }
    if target.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidParameter("target intensity must be non-negative".into()));
    }
    if !(0.0..=1.0).contains(&opts.mixing) || !(opts.beam_waist > 0.0) {
        return Err(Error::InvalidParameter("mixing must lie in [0, 1] and the beam waist be positive".into()));
    }
    let total: f64 = target.iter().sum();
    let sr_power: f64 = target.iter().zip(signal_region).filter(|(_, &s)| s).map(|(t, _)| t).sum();
    if !(sr_power > 0.0) {
        return Err(Error::EmptyRegion("target has no intensity in the signal region".into()));
    }
    let t_norm: Vec<f64> = shift(&target.iter().map(|t| t / total).collect::<Vec<_>>(), n);
    let sr = shift(signal_region, n);
    let amp_target: Vec<f64> = t_norm.iter().map(|t| t.sqrt()).collect();
    let beam = gaussian_beam(n, opts.beam_waist);
    let fft = Fft2::new(n);

    let mut phase: Vec<f64> = match opts.seed {
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n * n).map(|_| rng.random::<f64>() * 2.0 * PI).collect()
        }
        None => vec![0.0; n * n],
    };
    let mut field = vec![Complex64::new(0.0, 0.0); n * n];
    let mut intensity = vec![0.0; n * n];
    let mut errors = Vec::with_capacity(opts.iterations + 1);
    let m = opts.mixing;
    for it in 0..=opts.iterations {
        for k in 0..n * n {
            field[k] = Complex64::from_polar(beam[k], phase[k]);
        }
        fft.run(&mut field, false);
        for k in 0..n * n {
            intensity[k] = field[k].norm_sqr();
        }
        errors.push(region_error(&intensity, &t_norm, &sr));
        if it == opts.iterations {
            break;
        }
        for k in 0..n * n {
            let amp = if sr[k] { m * amp_target[k] } else { (1.0 - m) * field[k].norm() };
            field[k] = Complex64::from_polar(amp, field[k].arg());
        }
        fft.run(&mut field, true);
        for k in 0..n * n {
            phase[k] = field[k].arg();
        }
    }
    let efficiency =
        intensity.iter().zip(&sr).filter(|(_, &s)| s).map(|(i, _)| i).sum::<f64>() / intensity.iter().sum::<f64>();
    let phase = phase.iter().map(|p| p.rem_euclid(2.0 * PI)).collect();
    let final_error = *errors.last().unwrap();
    Ok(MrafResult {
        n,
        phase,
        intensity: shift(&intensity, n),
        errors,
        efficiency,
        stalled: final_error > opts.stall_threshold,
    })
}

/// 8-bit gray levels with 0 ↦ 0 and 2π ↦ 255.
pub fn phase_to_gray(phase: &[f64]) -> Vec<u8> {
    phase.iter().map(|p| (p.rem_euclid(2.0 * PI) / (2.0 * PI) * 255.0).round() as u8).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_levels_span_full_range() {
        assert_eq!(phase_to_gray(&[0.0, PI, 2.0 * PI - 1e-12]), vec![0, 128, 255]);
    }

    #[test]
    fn shift_is_an_involution() {
        let v: Vec<usize> = (0..16).collect();
        assert_eq!(shift(&shift(&v, 4), 4), v);
        assert_eq!(shift(&v, 4)[0], 10);
    }

    #[test]
    fn non_power_of_two_rejected() {
        let t = vec![1.0; 9];
        assert!(mraf_phase_mask(&t, &[true; 9], 3, &MrafOptions::default()).is_err());
    }
}
