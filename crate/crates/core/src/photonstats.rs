//! Output photon-number laws of the amplifier: per-mode laws for vacuum, coherent and thermal
//! inputs, filtering, multimode convolution, readout noise and moment formulas.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::modes::GainProfile;

/// Per-mode truncation used when none is given.
pub const DEFAULT_MODE_N_MAX: usize = 512;
/// Truncation of convolved multimode laws.
pub const DEFAULT_TOTAL_N_MAX: usize = 2048;
/// Largest probability mass allowed beyond the truncation.
pub const TAIL_TOLERANCE: f64 = 1e-6;
/// Readout-noise density grid step (counts).
pub const DEFAULT_READOUT_STEP: f64 = 0.1;

/// Entries below this are dropped from the end of a mass function.
const NEGLIGIBLE: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Vacuum,
    CoherentInput,
    ThermalInput,
    Thinned,
    Convolved,
    NoiseSmeared,
    Empirical,
}

/// Truncated probability mass function over photon number.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonLaw {
    p: Vec<f64>,
    n_max: usize,
    provenance: Provenance,
    mean: f64,
    variance: f64,
}

impl PhotonLaw {
    /// Wraps a mass function; `p[n]` for `n ≤ n_max`, implicit zeros afterwards.
    pub fn from_pmf(mut p: Vec<f64>, n_max: usize, provenance: Provenance) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidParameter("empty mass function".into()));
        }
        if let Some(bad) = p.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("negative or non-finite probability {bad}")));
        }
        p.truncate(n_max + 1);
        while p.len() > 1 && p[p.len() - 1] < NEGLIGIBLE {
            p.pop();
        }
        let total: f64 = p.iter().sum();
        if total > 1.0 + 1e-9 {
            return Err(Error::InvalidParameter(format!("mass function sums to {total}")));
        }
        if 1.0 - total > TAIL_TOLERANCE {
            return Err(Error::TailMass { mass: 1.0 - total, n_max });
        }
        let (mean, variance) = moments_of(&p);
        Ok(Self { p, n_max, provenance, mean, variance })
    }

    /// Point mass at `n`.
    pub fn delta(n: usize) -> Self {
        let mut p = vec![0.0; n + 1];
        p[n] = 1.0;
        Self { p, n_max: n, provenance: Provenance::Vacuum, mean: n as f64, variance: 0.0 }
    }

    pub fn pmf(&self) -> &[f64] {
        &self.p
    }

    /// `p(n)`, zero beyond the stored range.
    pub fn prob(&self, n: usize) -> f64 {
        self.p.get(n).copied().unwrap_or(0.0)
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn total_mass(&self) -> f64 {
        self.p.iter().sum()
    }

    /// `1 + Var/⟨n⟩²`.
    pub fn g2(&self) -> f64 {
        1.0 + self.variance / (self.mean * self.mean)
    }
}

fn moments_of(p: &[f64]) -> (f64, f64) {
    let total: f64 = p.iter().sum();
    let mean = p.iter().enumerate().map(|(n, v)| n as f64 * v).sum::<f64>() / total;
    let var = p.iter().enumerate().map(|(n, v)| (n as f64 - mean).powi(2) * v).sum::<f64>() / total;
    (mean, var)
}

/// Geometric (Bose–Einstein) law with mean `mu`.
pub fn geometric_law(mu: f64, n_max: usize, provenance: Provenance) -> Result<PhotonLaw> {
    if !(mu >= 0.0) {
        return Err(Error::InvalidParameter(format!("mean must be non-negative, got {mu}")));
    }
    if mu == 0.0 {
        return PhotonLaw::from_pmf(vec![1.0], n_max, provenance);
    }
    let r = mu / (1.0 + mu);
    let tail = r.powi(n_max as i32 + 1);
    if tail > TAIL_TOLERANCE {
        return Err(Error::TailMass { mass: tail, n_max });
    }
    let mut p = Vec::with_capacity(n_max + 1);
    let mut v = 1.0 / (1.0 + mu);
    for _ in 0..=n_max {
        p.push(v);
        v *= r;
        if v < NEGLIGIBLE {
            break;
        }
    }
    PhotonLaw::from_pmf(p, n_max, provenance)
}

fn check_gain(gain: f64) -> Result<()> {
    if !(gain >= 1.0) {
        return Err(Error::InvalidParameter(format!("mode gain must be >= 1, got {gain}")));
    }
    Ok(())
}

/// Amplified vacuum: thermal with mean `G − 1`.
pub fn vacuum_law(gain: f64, n_max: usize) -> Result<PhotonLaw> {
    check_gain(gain)?;
    geometric_law(gain - 1.0, n_max, Provenance::Vacuum)
}

/// Idler output for a coherent signal input `|α|²`:
/// `P(n) = (1−x²) e^{−x²|α|²} x^{2n} L_n(−|α|²/u²)` with `u² = G`, `x² = (G−1)/G`.
///
/// `q_n = x^{2n} L_n(−y)` follows the three-term Laguerre recurrence, whose terms are all
/// positive at negative argument; `q` is rescaled whenever it leaves [1e-200, 1e200] and the
/// accumulated scale is kept as a logarithm.
pub fn coherent_law(gain: f64, alpha2: f64, n_max: usize) -> Result<PhotonLaw> {
    check_gain(gain)?;
    if !(alpha2 >= 0.0) {
        return Err(Error::InvalidParameter(format!("|alpha|^2 must be non-negative, got {alpha2}")));
    }
    if gain == 1.0 {
        return PhotonLaw::from_pmf(vec![1.0], n_max, Provenance::CoherentInput);
    }
    if alpha2 == 0.0 {
        // L_n(0) = 1: the geometric closed form.
        return geometric_law(gain - 1.0, n_max, Provenance::CoherentInput);
    }
    let x2 = (gain - 1.0) / gain;
    let y = alpha2 / gain;
    let ln_pref = (1.0 - x2).ln() - x2 * alpha2;
    let mut log_scale = 0.0f64;
    let mut q_prev = 0.0;
    let mut q = 1.0;
    let mut p = Vec::with_capacity(n_max + 1);
    let mut mass = 0.0;
    let mut seen_peak = false;
    for n in 0..=n_max {
        let pn = (ln_pref + log_scale).exp() * q;
        p.push(pn);
        mass += pn;
        if pn > 0.0 {
            seen_peak = true;
        }
        if seen_peak && pn < NEGLIGIBLE && 1.0 - mass < TAIL_TOLERANCE {
            break;
        }
        let nf = n as f64;
        let next = (x2 * (2.0 * nf + 1.0 + y) * q - x2 * x2 * nf * q_prev) / (nf + 1.0);
        q_prev = q;
        q = next;
        if !(1e-200..=1e200).contains(&q) && q > 0.0 {
            let s = q.ln();
            q = 1.0;
            q_prev *= (-s).exp();
            log_scale += s;
        }
    }
    PhotonLaw::from_pmf(p, n_max, Provenance::CoherentInput)
}

/// Idler output for a thermal signal input of mean `n̄`: thermal with mean `(G−1)(n̄+1)`.
pub fn thermal_law(gain: f64, nbar: f64, n_max: usize) -> Result<PhotonLaw> {
    check_gain(gain)?;
    if !(nbar >= 0.0) {
        return Err(Error::InvalidParameter(format!("thermal mean must be non-negative, got {nbar}")));
    }
    geometric_law((gain - 1.0) * (nbar + 1.0), n_max, Provenance::ThermalInput)
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut lf = Vec::with_capacity(n + 1);
    lf.push(0.0);
    for k in 1..=n {
        lf.push(lf[k - 1] + (k as f64).ln());
    }
    lf
}

/// Binomial thinning of a photon law through a channel of transmission `T`.
pub fn apply_transmission(law: &PhotonLaw, t: f64) -> Result<PhotonLaw> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("transmission must lie in [0, 1], got {t}")));
    }
    if t == 1.0 {
        return Ok(law.clone());
    }
    let mass = law.total_mass();
    if t == 0.0 {
        return PhotonLaw::from_pmf(vec![mass], law.n_max, Provenance::Thinned);
    }
    let len = law.p.len();
    let lf = ln_factorials(len);
    let (lt, l1t) = (t.ln(), (1.0 - t).ln());
    let mut out = vec![0.0; len];
    for (n, &pn) in law.p.iter().enumerate() {
        if pn == 0.0 {
            continue;
        }
        let base = pn.ln() + lf[n];
        for (k, o) in out.iter_mut().enumerate().take(n + 1) {
            *o += (base - lf[k] - lf[n - k] + k as f64 * lt + (n - k) as f64 * l1t).exp();
        }
    }
    PhotonLaw::from_pmf(out, law.n_max, Provenance::Thinned)
}

fn convolve_pair(a: &[f64], b: &[f64], limit: usize) -> Vec<f64> {
    let len = (a.len() + b.len() - 1).min(limit + 1);
    let mut out = vec![0.0; len];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 || i >= len {
            continue;
        }
        for (o, &y) in out[i..].iter_mut().zip(b) {
            *o += x * y;
        }
    }
    out
}

/// Law of the sum of independent counts, truncated at `limit`.
pub fn convolve(laws: &[PhotonLaw], limit: usize) -> Result<PhotonLaw> {
    let Some(first) = laws.first() else {
        return Ok(PhotonLaw::delta(0));
    };
    let n_max = laws.iter().map(|l| l.n_max).sum::<usize>().min(limit);
    let mut acc = first.p.clone();
    let mut expected = first.total_mass();
    for law in &laws[1..] {
        acc = convolve_pair(&acc, &law.p, n_max);
        expected *= law.total_mass();
    }
    let clipped = expected - acc.iter().sum::<f64>();
    if clipped > TAIL_TOLERANCE {
        return Err(Error::TailMass { mass: clipped, n_max });
    }
    PhotonLaw::from_pmf(acc, n_max, Provenance::Convolved)
}

/// Continuous density of readout counts on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CountDensity {
    pub start: f64,
    pub step: f64,
    pub density: Vec<f64>,
}

impl CountDensity {
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.density.iter().enumerate().map(move |(k, d)| (self.start + k as f64 * self.step, *d))
    }

    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.step
    }

    pub fn mean(&self) -> f64 {
        self.points().map(|(x, d)| x * d).sum::<f64>() * self.step / self.integral()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.points().map(|(x, d)| (x - m).powi(2) * d).sum::<f64>() * self.step / self.integral()
    }
}

fn normal_pdf(x: f64, sigma: f64) -> f64 {
    (-0.5 * (x / sigma).powi(2)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Gaussian readout noise of standard deviation `sigma` convolved onto the law, sampled every
/// `step` counts. With `sigma = 0` the mass function itself is returned on a unit grid.
pub fn smear_readout(law: &PhotonLaw, sigma: f64, step: f64) -> Result<CountDensity> {
    if !(sigma >= 0.0) || !(step > 0.0) {
        return Err(Error::InvalidParameter(format!("need sigma >= 0 and step > 0, got {sigma}, {step}")));
    }
    if sigma == 0.0 {
        return Ok(CountDensity { start: 0.0, step: 1.0, density: law.p.clone() });
    }
    let reach = 10.0 * sigma;
    let start = (-reach / step).floor() * step;
    let end = (law.p.len() - 1) as f64 + reach;
    let count = ((end - start) / step).ceil() as usize + 1;
    let mut density = vec![0.0; count];
    for (k, d) in density.iter_mut().enumerate() {
        let x = start + k as f64 * step;
        let lo = (x - reach).ceil().max(0.0) as usize;
        let hi = ((x + reach).floor() as usize).min(law.p.len() - 1);
        if lo > hi {
            continue;
        }
        *d = (lo..=hi).map(|n| law.p[n] * normal_pdf(x - n as f64, sigma)).sum();
    }
    Ok(CountDensity { start, step, density })
}

/// Probability that the noisy count falls in `[k − ½, k + ½)` for `k = first..first+bins`.
pub fn readout_bin_probabilities(law: &PhotonLaw, sigma: f64, first: i64, bins: usize) -> Vec<f64> {
    (0..bins as i64)
        .map(|b| {
            let k = first + b;
            if sigma == 0.0 {
                return if k >= 0 { law.prob(k as usize) } else { 0.0 };
            }
            let reach = 10.0 * sigma;
            let lo = ((k as f64 - 0.5 - reach).ceil().max(0.0)) as usize;
            let hi = ((k as f64 + 0.5 + reach).floor().max(-1.0)) as i64;
            if hi < 0 {
                return 0.0;
            }
            let hi = (hi as usize).min(law.p.len() - 1);
            (lo..=hi)
                .map(|n| {
                    let a = (k as f64 - 0.5 - n as f64) / sigma;
                    let b = (k as f64 + 0.5 - n as f64) / sigma;
                    law.p[n] * (normal_cdf(b) - normal_cdf(a))
                })
                .sum()
        })
        .collect()
}

/// `1 + (Var − Var_vac)/(⟨N⟩ − ⟨N_vac⟩)²`.
pub fn g2_corrected(mean: f64, var: f64, mean_vac: f64, var_vac: f64) -> Result<f64> {
    let m = mean - mean_vac;
    if !(m > 0.0) {
        return Err(Error::G2Domain { mean, mean_vac });
    }
    Ok(1.0 + (var - var_vac) / (m * m))
}

/// Signal state injected in one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InputState {
    Vacuum,
    /// Coherent amplitude squared |α|² (photons).
    Coherent {
        alpha2: f64,
    },
    /// Thermal mean photon number n̄.
    Thermal {
        nbar: f64,
    },
}

/// Input state of one mode and the filter transmission of its detected output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeInput {
    pub state: InputState,
    pub transmission: f64,
}

impl ModeInput {
    pub fn vacuum(transmission: f64) -> Self {
        Self { state: InputState::Vacuum, transmission }
    }

    /// Mean input photons (|α|² or n̄).
    pub fn photons(&self) -> f64 {
        match self.state {
            InputState::Vacuum => 0.0,
            InputState::Coherent { alpha2 } => alpha2,
            InputState::Thermal { nbar } => nbar,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.transmission) {
            return Err(Error::InvalidParameter(format!("transmission {} outside [0, 1]", self.transmission)));
        }
        if !(self.photons() >= 0.0) {
            return Err(Error::InvalidParameter("input photon number must be non-negative".into()));
        }
        Ok(())
    }

    /// Unfiltered per-mode mean and variance of the output.
    pub fn raw_moments(&self, gain: f64) -> (f64, f64) {
        match self.state {
            InputState::Vacuum => (gain - 1.0, gain * (gain - 1.0)),
            InputState::Coherent { alpha2 } => {
                ((alpha2 + 1.0) * (gain - 1.0), gain * (gain - 1.0) * (1.0 + (2.0 - 1.0 / gain) * alpha2))
            }
            InputState::Thermal { nbar } => {
                let mu = (gain - 1.0) * (nbar + 1.0);
                (mu, mu * (mu + 1.0))
            }
        }
    }
}

/// Filtered output law of one mode.
pub fn mode_law(input: &ModeInput, gain: f64, n_max: usize) -> Result<PhotonLaw> {
    input.validate()?;
    let raw = match input.state {
        InputState::Vacuum => vacuum_law(gain, n_max)?,
        InputState::Coherent { alpha2 } => coherent_law(gain, alpha2, n_max)?,
        InputState::Thermal { nbar } => thermal_law(gain, nbar, n_max)?,
    };
    apply_transmission(&raw, input.transmission)
}

/// Filtered multimode law: per-mode laws convolved over all modes.
pub fn multimode_law(
    inputs: &[ModeInput],
    gains: &GainProfile,
    n_max_mode: usize,
    n_max_total: usize,
) -> Result<PhotonLaw> {
    check_lengths(inputs, gains)?;
    let laws =
        inputs.iter().zip(&gains.gains).map(|(inp, &g)| mode_law(inp, g, n_max_mode)).collect::<Result<Vec<_>>>()?;
    convolve(&laws, n_max_total)
}

fn check_lengths(inputs: &[ModeInput], gains: &GainProfile) -> Result<()> {
    if inputs.len() > gains.len() {
        return Err(Error::InvalidParameter(format!("{} inputs for {} modes", inputs.len(), gains.len())));
    }
    Ok(())
}

/// Mean and variance of the total detected photon number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

impl Moments {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// `N = Σ T_m(|α_m|²+1)(G_m−1)`, `ΔN² = Σ T_m² G_m(G_m−1)[1+(2−1/G_m)|α_m|²]`; thermal inputs
/// use the same `T`/`T²` weighting of their own moments.
pub fn output_moments(inputs: &[ModeInput], gains: &GainProfile) -> Result<Moments> {
    check_lengths(inputs, gains)?;
    let mut out = Moments { mean: 0.0, variance: 0.0 };
    for (inp, &g) in inputs.iter().zip(&gains.gains) {
        inp.validate()?;
        let (mu, var) = inp.raw_moments(g);
        let t = inp.transmission;
        out.mean += t * mu;
        out.variance += t * t * var;
    }
    Ok(out)
}

/// Exact moments after binomial thinning: variance `T²Var + T(1−T)⟨n⟩` per mode.
pub fn thinned_moments(inputs: &[ModeInput], gains: &GainProfile) -> Result<Moments> {
    check_lengths(inputs, gains)?;
    let mut out = Moments { mean: 0.0, variance: 0.0 };
    for (inp, &g) in inputs.iter().zip(&gains.gains) {
        inp.validate()?;
        let (mu, var) = inp.raw_moments(g);
        let t = inp.transmission;
        out.mean += t * mu;
        out.variance += t * t * var + t * (1.0 - t) * mu;
    }
    Ok(out)
}

/// Variance difference between thinning and the `T²` moment formula, `Σ T(1−T)⟨n⟩`.
pub fn moments_thinning_gap(inputs: &[ModeInput], gains: &GainProfile) -> Result<f64> {
    Ok(thinned_moments(inputs, gains)?.variance - output_moments(inputs, gains)?.variance)
}

fn cumulative(law: &PhotonLaw) -> Vec<f64> {
    let mut c = Vec::with_capacity(law.p.len());
    let mut acc = 0.0;
    for &v in &law.p {
        acc += v;
        c.push(acc);
    }
    c
}

fn draw(cdf: &[f64], u: f64) -> u64 {
    let total = cdf[cdf.len() - 1];
    cdf.partition_point(|&c| c <= u * total).min(cdf.len() - 1) as u64
}

/// I.i.d. photon counts by inverse CDF; deterministic for a fixed seed.
pub fn sample_counts(law: &PhotonLaw, seed: u64, count: usize) -> Vec<u64> {
    let cdf = cumulative(law);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| draw(&cdf, rng.random::<f64>())).collect()
}

/// I.i.d. camera readings: photon count plus Gaussian readout noise.
pub fn sample_readout(law: &PhotonLaw, sigma: f64, seed: u64, count: usize) -> Vec<f64> {
    let cdf = cumulative(law);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = draw(&cdf, rng.random::<f64>()) as f64;
            let z: f64 = rng.sample(StandardNormal);
            n + sigma * z
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_gain_vacuum_is_delta() {
        let l = vacuum_law(1.0, 64).unwrap();
        assert_eq!(l.pmf(), &[1.0]);
    }

    #[test]
    fn gain_two_vacuum_is_half_powers() {
        let l = vacuum_law(2.0, 128).unwrap();
        for n in 0..40 {
            assert!((l.prob(n) - 0.5f64.powi(n as i32 + 1)).abs() < 1e-16);
        }
        assert!((l.mean() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coherent_moments_match_closed_form() {
        let l = coherent_law(2.0, 3.0, 512).unwrap();
        assert!((l.mean() - 4.0).abs() < 1e-9);
        assert!((l.variance() - 11.0).abs() < 1e-8);
    }

    #[test]
    fn coherent_unit_gain_is_vacuum() {
        assert_eq!(coherent_law(1.0, 40.0, 64).unwrap().pmf(), &[1.0]);
    }

    #[test]
    fn large_amplitude_stays_finite() {
        let l = coherent_law(1.5, 400.0, 2048).unwrap();
        let (m, v) = ModeInput { state: InputState::Coherent { alpha2: 400.0 }, transmission: 1.0 }.raw_moments(1.5);
        assert!((l.mean() - m).abs() < 1e-6 * m);
        assert!((l.variance() - v).abs() < 1e-6 * v);
    }

    #[test]
    fn tail_mass_is_reported() {
        assert!(matches!(vacuum_law(50.0, 100), Err(Error::TailMass { .. })));
        assert!(matches!(coherent_law(3.0, 200.0, 64), Err(Error::TailMass { .. })));
    }

    #[test]
    fn thinning_edges() {
        let l = vacuum_law(3.0, 256).unwrap();
        assert_eq!(apply_transmission(&l, 1.0).unwrap(), l);
        assert!((apply_transmission(&l, 0.0).unwrap().prob(0) - 1.0).abs() < 1e-12);
        assert!(apply_transmission(&l, 1.5).is_err());
    }

    #[test]
    fn g2_domain() {
        assert!(g2_corrected(1.0, 2.0, 1.0, 1.0).is_err());
        assert_eq!(g2_corrected(3.0, 5.0, 1.0, 1.0).unwrap(), 2.0);
    }

    #[test]
    fn smear_zero_sigma_is_identity() {
        let l = vacuum_law(2.0, 64).unwrap();
        let d = smear_readout(&l, 0.0, 0.1).unwrap();
        assert_eq!(d.density, l.pmf());
    }

    #[test]
    fn delta_samples_are_constant() {
        assert!(sample_counts(&PhotonLaw::delta(3), 7, 100).iter().all(|&n| n == 3));
    }
}
