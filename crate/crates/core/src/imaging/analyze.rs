use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stack::ShotStack;
use super::Scene;
use crate::error::{Error, Result};
use crate::photonstats::g2_corrected;
use crate::scene::CountHistogram;

/// Named set of pixel indices (row-major).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub name: String,
    pub pixels: Vec<usize>,
}

impl Region {
    pub fn rect(name: &str, scene: &Scene, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        Self::rect_in(name, scene.width, scene.height, x0, y0, w, h)
    }

    pub fn rect_in(name: &str, width: usize, height: usize, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if x0 + w > width || y0 + h > height {
            return Err(Error::InvalidParameter(format!(
                "region {name} [{x0}, {}) x [{y0}, {}) exceeds {width}x{height}",
                x0 + w,
                y0 + h
            )));
        }
        let pixels = (y0..y0 + h).flat_map(|y| (x0..x0 + w).map(move |x| y * width + x)).collect();
        Ok(Self { name: name.to_string(), pixels })
    }

    pub fn from_points(name: &str, width: usize, height: usize, points: &[(usize, usize)]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(points.len());
        for &(x, y) in points {
            if x >= width || y >= height {
                return Err(Error::InvalidParameter(format!(
                    "region {name}: pixel ({x}, {y}) outside {width}x{height}"
                )));
            }
            pixels.push(y * width + x);
        }
        Ok(Self { name: name.to_string(), pixels })
    }
}

/// Reference used to remove fluorescence from a region's g².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VacuumReference {
    None,
    /// Pooled statistics of the named region of the same stack.
    Region(String),
    Stats {
        mean: f64,
        variance: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionStats {
    pub name: String,
    pub pixels: usize,
    pub samples: usize,
    pub mean: f64,
    pub variance: f64,
    pub histogram: CountHistogram,
    /// Fluorescence-corrected g², when a vacuum reference is set and the region is brighter.
    pub g2_corr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackStats {
    pub width: usize,
    pub height: usize,
    pub shots: usize,
    pub mean: Vec<f64>,
    /// Unbiased per-pixel variance over shots.
    pub variance: Vec<f64>,
    pub regions: Vec<RegionStats>,
}

impl StackStats {
    pub fn region(&self, name: &str) -> Option<&RegionStats> {
        self.regions.iter().find(|r| r.name == name)
    }
}

/// Streaming accumulator: per-pixel Welford moments plus the pooled samples of each region.
pub struct StackAnalyzer {
    width: usize,
    height: usize,
    shots: usize,
    count: Vec<f64>,
    mean: Vec<f64>,
    m2: Vec<f64>,
    regions: Vec<Region>,
    samples: Vec<Vec<f64>>,
    vacuum: VacuumReference,
}

impl StackAnalyzer {
    pub fn new(width: usize, height: usize, regions: &[Region], vacuum: VacuumReference) -> Result<Self> {
        let n = width * height;
        for r in regions {
            if r.pixels.is_empty() {
                return Err(Error::EmptyRegion(r.name.clone()));
            }
            if let Some(&p) = r.pixels.iter().find(|&&p| p >= n) {
                return Err(Error::InvalidParameter(format!("region {} pixel {p} outside {width}x{height}", r.name)));
            }
        }
        if let VacuumReference::Region(name) = &vacuum {
            if !regions.iter().any(|r| &r.name == name) {
                return Err(Error::EmptyRegion(format!("vacuum reference {name} is not a listed region")));
            }
        }
        Ok(Self {
            width,
            height,
            shots: 0,
            count: vec![0.0; n],
            mean: vec![0.0; n],
            m2: vec![0.0; n],
            regions: regions.to_vec(),
            samples: vec![Vec::new(); regions.len()],
            vacuum,
        })
    }

    /// Adds whole frames (shot-major).
    pub fn push(&mut self, frames: &[f32]) -> Result<()> {
        let n = self.width * self.height;
        if frames.len() % n != 0 {
            return Err(Error::Format(format!("{} values is not a whole number of frames", frames.len())));
        }
        let k = frames.len() / n;
        self.count.par_iter_mut().zip(self.mean.par_iter_mut()).zip(self.m2.par_iter_mut()).enumerate().for_each(
            |(i, ((c, m), m2))| {
                for t in 0..k {
                    let x = frames[t * n + i] as f64;
                    *c += 1.0;
                    let d = x - *m;
                    *m += d / *c;
                    *m2 += d * (x - *m);
                }
            },
        );
        for (r, s) in self.regions.iter().zip(self.samples.iter_mut()) {
            for t in 0..k {
                s.extend(r.pixels.iter().map(|&p| frames[t * n + p] as f64));
            }
        }
        self.shots += k;
        Ok(())
    }

    pub fn finish(self) -> Result<StackStats> {
        if self.shots == 0 {
            return Err(Error::EmptyRegion("stack has no shots".into()));
        }
        let variance =
            self.m2.iter().map(|m2| if self.shots > 1 { m2 / (self.shots - 1) as f64 } else { 0.0 }).collect();
        let pooled: Vec<(f64, f64)> = self.samples.iter().map(|s| mean_variance(s)).collect();
        let vac = match &self.vacuum {
            VacuumReference::None => None,
            VacuumReference::Stats { mean, variance } => Some((*mean, *variance)),
            VacuumReference::Region(name) => self.regions.iter().position(|r| &r.name == name).map(|i| pooled[i]),
        };
        let regions = self
            .regions
            .iter()
            .zip(&self.samples)
            .zip(&pooled)
            .map(|((r, s), &(mean, var))| RegionStats {
                name: r.name.clone(),
                pixels: r.pixels.len(),
                samples: s.len(),
                mean,
                variance: var,
                histogram: CountHistogram::from_samples(s),
                g2_corr: vac.and_then(|(mv, vv)| g2_corrected(mean, var, mv, vv).ok()),
            })
            .collect();
        Ok(StackStats { width: self.width, height: self.height, shots: self.shots, mean: self.mean, variance, regions })
    }
}

fn mean_variance(s: &[f64]) -> (f64, f64) {
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    let var = if s.len() > 1 { s.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var)
}

/// Mean and variance maps, pooled region histograms and corrected g² of a stack.
pub fn analyze_stack(stack: &ShotStack, regions: &[Region], vacuum: VacuumReference) -> Result<StackStats> {
    let mut a = StackAnalyzer::new(stack.width(), stack.height(), regions, vacuum)?;
    a.push(&stack.frames)?;
    a.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::StackHeader;

    #[test]
    fn constant_stack_has_zero_variance() {
        let h = StackHeader { width: 3, height: 2, shots: 5, seed: 0 };
        let s = ShotStack::new(h, vec![4.0; 30]).unwrap();
        let r = Region::rect_in("all", 3, 2, 0, 0, 3, 2).unwrap();
        let st = analyze_stack(&s, &[r], VacuumReference::None).unwrap();
        assert!(st.variance.iter().all(|&v| v == 0.0));
        assert!(st.mean.iter().all(|&m| m == 4.0));
        assert_eq!(st.regions[0].histogram.normalized(), vec![1.0]);
    }

    #[test]
    fn empty_region_rejected() {
        let r = Region { name: "x".into(), pixels: vec![] };
        assert!(matches!(StackAnalyzer::new(2, 2, &[r], VacuumReference::None), Err(Error::EmptyRegion(_))));
        assert!(Region::rect_in("x", 4, 4, 3, 3, 2, 1).is_err());
    }
}
