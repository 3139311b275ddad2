//! Camera-plane scenes, Monte Carlo shot stacks, stack analysis and SLM phase masks.

mod analyze;
mod mraf;
mod simulate;
mod stack;

pub use analyze::{analyze_stack, Region, RegionStats, StackAnalyzer, StackStats, VacuumReference};
pub use mraf::{
    gaussian_beam, letter_a_target, mraf_phase_mask, phase_to_gray, signal_region_box, MrafOptions, MrafResult,
};
pub use simulate::{simulate_stack, simulate_streaming, ImagingModel, DEFAULT_CHUNK_SHOTS, DEFAULT_MEMORY_BUDGET};
pub use stack::{ShotStack, StackHeader, StackReader, StackWriter, STACK_MAGIC};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::presets::{N_COHERENT, N_THERMAL, PIXEL_AREA};
use crate::scene::InputKind;

/// One input beam: its statistics and the photons per pixel at unit scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub kind: InputKind,
    pub photons: f64,
}

/// Which source lights a pixel and with what intensity scale.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PixelInput {
    pub source: Option<usize>,
    pub scale: f64,
}

/// Per-pixel input layout on the camera grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub width: usize,
    pub height: usize,
    pub pitch_um: f64,
    pub sources: Vec<Source>,
    /// Row-major, `y * width + x`.
    pub pixels: Vec<PixelInput>,
    /// Local multiplier of the gain coefficient.
    pub gain_map: Vec<f64>,
}

impl Scene {
    /// All-vacuum scene with uniform gain.
    pub fn vacuum(width: usize, height: usize, pitch_um: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!("scene must be at least 1x1, got {width}x{height}")));
        }
        if !(pitch_um > 0.0) {
            return Err(Error::InvalidParameter("pixel pitch must be positive".into()));
        }
        let n = width * height;
        Ok(Self {
            width,
            height,
            pitch_um,
            sources: Vec::new(),
            pixels: vec![PixelInput::default(); n],
            gain_map: vec![1.0; n],
        })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn add_source(&mut self, kind: InputKind, photons: f64) -> Result<usize> {
        if !(photons >= 0.0) || !photons.is_finite() {
            return Err(Error::InvalidParameter(format!("source photon number {photons} must be finite and >= 0")));
        }
        self.sources.push(Source { kind, photons });
        Ok(self.sources.len() - 1)
    }

    /// Lights pixels with `scale(x, y)`. Pixels where the scale is zero are left alone; a pixel
    /// already lit by another source is rejected, since mixed input states are not modeled.
    pub fn paint<F: Fn(usize, usize) -> f64>(&mut self, source: usize, scale: F) -> Result<()> {
        if source >= self.sources.len() {
            return Err(Error::InvalidParameter(format!("unknown source {source}")));
        }
        for y in 0..self.height {
            for x in 0..self.width {
                let s = scale(x, y);
                if !(s >= 0.0) || !s.is_finite() {
                    return Err(Error::InvalidParameter(format!("intensity scale {s} at ({x}, {y})")));
                }
                if s == 0.0 {
                    continue;
                }
                let i = self.index(x, y);
                let px = &mut self.pixels[i];
                match px.source {
                    Some(other) if other != source && px.scale > 0.0 => {
                        return Err(Error::InvalidParameter(format!(
                            "pixel ({x}, {y}) lit by sources {other} and {source}"
                        )));
                    }
                    _ => *px = PixelInput { source: Some(source), scale: px.scale + s },
                }
            }
        }
        Ok(())
    }

    pub fn paint_mask(&mut self, source: usize, mask: &[bool]) -> Result<()> {
        if mask.len() != self.len() {
            return Err(Error::InvalidParameter(format!("mask has {} pixels, scene {}", mask.len(), self.len())));
        }
        let w = self.width;
        self.paint(source, |x, y| if mask[y * w + x] { 1.0 } else { 0.0 })
    }

    /// Input kind and photons per pulse at pixel `i`.
    pub fn pixel_state(&self, i: usize) -> (InputKind, f64) {
        let px = self.pixels[i];
        match px.source {
            Some(s) if px.scale > 0.0 => (self.sources[s].kind, self.sources[s].photons * px.scale),
            _ => (InputKind::Vacuum, 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParameter("scene has no pixels".into()));
        }
        if self.pixels.len() != self.len() || self.gain_map.len() != self.len() {
            return Err(Error::InvalidParameter("pixel or gain map size differs from width x height".into()));
        }
        for (i, px) in self.pixels.iter().enumerate() {
            if !(px.scale >= 0.0) {
                return Err(Error::InvalidParameter(format!("negative intensity scale at pixel {i}")));
            }
            if let Some(s) = px.source {
                if s >= self.sources.len() {
                    return Err(Error::InvalidParameter(format!("pixel {i} refers to missing source {s}")));
                }
            }
        }
        if self.gain_map.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
            return Err(Error::InvalidParameter("gain map entries must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Letter "A" on a `width × height` grid: two slanted legs and a crossbar inside a centered
/// box covering `frac` of the smaller dimension.
pub fn letter_a_mask(width: usize, height: usize, frac: f64) -> Vec<bool> {
    let size = frac * width.min(height) as f64;
    let (cx, cy) = (width as f64 / 2.0, height as f64 / 2.0);
    let top = cy - size / 2.0;
    let half = 0.42 * size;
    let stroke = 0.12 * size;
    let mut mask = vec![false; width * height];
    for y in 0..height {
        let t = (y as f64 + 0.5 - top) / size;
        if !(0.0..=1.0).contains(&t) {
            continue;
        }
        let (xl, xr) = (cx - half * t, cx + half * t);
        for x in 0..width {
            let xf = x as f64 + 0.5;
            let leg = (xf - xl).abs() <= stroke / 2.0 || (xf - xr).abs() <= stroke / 2.0;
            let bar = t >= 0.55 && t <= 0.55 + stroke / size && xf >= xl && xf <= xr;
            mask[y * width + x] = leg || bar;
        }
    }
    mask
}

/// Gaussian intensity profile `exp(−2r²/w²)` cut to zero beyond `cutoff` pixels.
pub fn gaussian_spot(cx: f64, cy: f64, waist_px: f64, cutoff_px: f64) -> impl Fn(usize, usize) -> f64 {
    move |x, y| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        let r2 = dx * dx + dy * dy;
        if r2 > cutoff_px * cutoff_px {
            0.0
        } else {
            (-2.0 * r2 / (waist_px * waist_px)).exp()
        }
    }
}

/// Camera-plane layout of the imaging experiment with its analysis regions.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentScene {
    pub scene: Scene,
    pub thermal: Region,
    pub coherent: Region,
    pub vacuum: Region,
}

impl ExperimentScene {
    /// Side of the square camera window (pixels).
    pub const SIZE: usize = 128;

    /// Coherent "A" at `n_coherent` photons per pixel, a thermal Gaussian spot between the legs
    /// with `n_thermal` at its center, vacuum elsewhere. Regions are 3×3 on the spot and on the
    /// left leg, and 8×8 in an empty corner.
    pub fn build(n_thermal: f64, n_coherent: f64) -> Result<Self> {
        let n = Self::SIZE;
        let mut scene = Scene::vacuum(n, n, PIXEL_AREA.sqrt() * 1e6)?;
        let a = scene.add_source(InputKind::Coherent, n_coherent)?;
        scene.paint_mask(a, &letter_a_mask(n, n, 0.8))?;
        let spot = scene.add_source(InputKind::Thermal, n_thermal)?;
        scene.paint(spot, gaussian_spot(64.0, 100.0, 8.0, 16.0))?;
        Ok(Self {
            thermal: Region::rect("thermal", &scene, 63, 99, 3, 3)?,
            coherent: Region::rect("coherent", &scene, 50, 43, 3, 3)?,
            vacuum: Region::rect("vacuum", &scene, 4, 4, 8, 8)?,
            scene,
        })
    }

    pub fn standard() -> Result<Self> {
        Self::build(N_THERMAL, N_COHERENT)
    }

    pub fn regions(&self) -> Vec<Region> {
        vec![self.thermal.clone(), self.coherent.clone(), self.vacuum.clone()]
    }
}
