use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::stack::{ShotStack, StackHeader};
use super::Scene;
use crate::error::{Error, Result};
use crate::modes::GainProfile;
use crate::photonstats::{
    convolve, mode_law, readout_bin_probabilities, smear_readout, CountDensity, PhotonLaw, DEFAULT_MODE_N_MAX,
    DEFAULT_READOUT_STEP, DEFAULT_TOTAL_N_MAX,
};
use crate::pipeline::Model;
use crate::scene::{mode_inputs, InputKind};

/// Shots generated per streaming chunk.
pub const DEFAULT_CHUNK_SHOTS: usize = 256;
/// Largest in-memory stack (bytes).
pub const DEFAULT_MEMORY_BUDGET: usize = 1 << 31;

/// Per-mode data shared by every pixel: singular values, filter transmissions and input
/// overlaps of the retained modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagingModel {
    pub lambda: Vec<f64>,
    pub transmissions: Vec<f64>,
    pub overlaps: Vec<f64>,
    pub length_m: f64,
    pub g: f64,
    pub sigma: f64,
    pub n_max_mode: usize,
    pub n_max_total: usize,
}

impl ImagingModel {
    /// First `modes` modes of a built model.
    pub fn from_model(model: &Model, modes: usize) -> Self {
        let k = modes.min(model.basis.len());
        Self {
            lambda: model.basis.lambda[..k].to_vec(),
            transmissions: model.transmissions[..k].to_vec(),
            overlaps: model.overlaps[..k].to_vec(),
            length_m: model.setup.crystal.length_m,
            g: model.setup.g,
            sigma: model.setup.sigma,
            n_max_mode: DEFAULT_MODE_N_MAX,
            n_max_total: DEFAULT_TOTAL_N_MAX,
        }
    }

    pub fn modes(&self) -> usize {
        self.lambda.len()
    }

    pub fn gains(&self, gain_scale: f64) -> GainProfile {
        GainProfile::from_lambda(&self.lambda, self.g * gain_scale, self.length_m)
    }

    /// Filtered output law of every mode for one pixel input.
    pub fn mode_laws(&self, kind: InputKind, n_input: f64, gain_scale: f64) -> Result<Vec<PhotonLaw>> {
        let gains = self.gains(gain_scale);
        let inputs = mode_inputs(n_input, &self.overlaps, &self.transmissions, kind)?;
        inputs.iter().zip(&gains.gains).map(|(inp, &g)| mode_law(inp, g, self.n_max_mode)).collect()
    }

    /// Exact detected photon law of one pixel.
    pub fn pixel_law(&self, kind: InputKind, n_input: f64, gain_scale: f64) -> Result<PhotonLaw> {
        convolve(&self.mode_laws(kind, n_input, gain_scale)?, self.n_max_total)
    }

    /// Readout-smeared count density: the theory curve for a region histogram.
    pub fn predict_histogram(&self, kind: InputKind, n_input: f64) -> Result<CountDensity> {
        smear_readout(&self.pixel_law(kind, n_input, 1.0)?, self.sigma, DEFAULT_READOUT_STEP)
    }

    /// Probabilities of unit-width count bins `first, first+1, …`.
    pub fn predict_bins(&self, kind: InputKind, n_input: f64, first: i64, bins: usize) -> Result<Vec<f64>> {
        Ok(readout_bin_probabilities(&self.pixel_law(kind, n_input, 1.0)?, self.sigma, first, bins))
    }
}

/// Alias tables of the non-trivial mode laws of one pixel.
struct PixelSampler {
    modes: Vec<WeightedAliasIndex<f64>>,
}

impl PixelSampler {
    fn new(laws: &[PhotonLaw]) -> Result<Self> {
        let modes = laws
            .iter()
            .filter(|l| l.n_max() > 0)
            .map(|l| {
                WeightedAliasIndex::new(l.pmf().to_vec())
                    .map_err(|e| Error::InvalidParameter(format!("cannot sample photon law: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { modes })
    }

    fn draw(&self, rng: &mut ChaCha8Rng, sigma: f64) -> f32 {
        let n: usize = self.modes.iter().map(|m| m.sample(rng)).sum();
        let z: f64 = rng.sample(StandardNormal);
        (n as f64 + sigma * z) as f32
    }
}

fn build_samplers(scene: &Scene, model: &ImagingModel) -> Result<(Vec<Arc<PixelSampler>>, Vec<usize>)> {
    let mut keys: HashMap<(u8, u64, u64), usize> = HashMap::new();
    let mut specs = Vec::new();
    let mut index = Vec::with_capacity(scene.len());
    for i in 0..scene.len() {
        let (kind, n) = scene.pixel_state(i);
        let gain_scale = scene.gain_map[i];
        let key = (kind as u8, n.to_bits(), gain_scale.to_bits());
        let next = specs.len();
        let slot = *keys.entry(key).or_insert_with(|| {
            specs.push((kind, n, gain_scale));
            next
        });
        index.push(slot);
    }
    let samplers = specs
        .par_iter()
        .map(|&(kind, n, gs)| Ok(Arc::new(PixelSampler::new(&model.mode_laws(kind, n, gs)?)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok((samplers, index))
}

/// Generates `shots` frames in chunks and hands each chunk (shot-major `f32`) to `sink`.
///
/// Pixel `i` draws from its own ChaCha8 stream `i` of the master seed, one shot after the
/// other, so the output depends only on (scene, model, shots, seed) and not on the chunk
/// size or the thread count.
pub fn simulate_streaming<F>(
    scene: &Scene,
    model: &ImagingModel,
    shots: usize,
    seed: u64,
    chunk_shots: usize,
    mut sink: F,
) -> Result<()>
where
    F: FnMut(&[f32]) -> Result<()>,
{
    scene.validate()?;
    if !(model.sigma >= 0.0) {
        return Err(Error::InvalidParameter("readout noise must be >= 0".into()));
    }
    let chunk_shots = chunk_shots.max(1);
    let (samplers, index) = build_samplers(scene, model)?;
    let pixels = scene.len();
    let mut rngs: Vec<ChaCha8Rng> = (0..pixels)
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(i as u64);
            r
        })
        .collect();
    let mut columns = vec![0f32; pixels * chunk_shots];
    let mut frames = vec![0f32; pixels * chunk_shots];
    let mut done = 0;
    while done < shots {
        let k = chunk_shots.min(shots - done);
        columns[..pixels * k].par_chunks_mut(k).zip(rngs.par_iter_mut()).enumerate().for_each(|(i, (col, rng))| {
            let s = &samplers[index[i]];
            for v in col.iter_mut() {
                *v = s.draw(rng, model.sigma);
            }
        });
        for i in 0..pixels {
            for t in 0..k {
                frames[t * pixels + i] = columns[i * k + t];
            }
        }
        sink(&frames[..pixels * k])?;
        done += k;
    }
    Ok(())
}

/// In-memory stack; fails when the frames would exceed `memory_budget` bytes.
pub fn simulate_stack(
    scene: &Scene,
    model: &ImagingModel,
    shots: usize,
    seed: u64,
    memory_budget: usize,
) -> Result<ShotStack> {
    let bytes = scene.len().saturating_mul(shots).saturating_mul(4);
    if bytes > memory_budget {
        return Err(Error::MemoryBudget(bytes));
    }
    let mut frames = Vec::with_capacity(scene.len() * shots);
    simulate_streaming(scene, model, shots, seed, DEFAULT_CHUNK_SHOTS, |chunk| {
        frames.extend_from_slice(chunk);
        Ok(())
    })?;
    let header = StackHeader { width: scene.width as u32, height: scene.height as u32, shots: shots as u32, seed };
    ShotStack::new(header, frames)
}
