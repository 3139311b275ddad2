//! Run configuration. Every physical key carries its unit in the name.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dfgamp::dispersion::{dispersion_params, solve_phase_matching_angle, CrystalConfig};
use dfgamp::imaging::{ExperimentScene, ImagingModel, MrafOptions, Region, Scene};
use dfgamp::jsa::PumpSpectrum;
use dfgamp::presets::{self, gain_per_length, Setup};
use dfgamp::scene::{input_photon_number, Arm, FilterModel, InputKind};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub crystal: CrystalSection,
    pub pump: PumpSection,
    #[serde(default)]
    pub filter: FilterSection,
    #[serde(default)]
    pub input: InputSection,
    #[serde(default)]
    pub stats: StatsSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSection>,
    #[serde(default)]
    pub scene: SceneSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub mraf: MrafSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DispersionSource {
    /// k′ and k″ from the Sellmeier equations.
    Sellmeier,
    /// Tabulated values for 400 → 853 + 753 nm.
    #[serde(rename = "tabulated_853")]
    Tabulated853,
    /// Tabulated values for 400 → 840 + 763.6 nm.
    #[serde(rename = "tabulated_840")]
    Tabulated840,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalSection {
    pub signal_nm: f64,
    pub idler_nm: f64,
    pub length_mm: f64,
    /// Solved from phase matching when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_deg: Option<f64>,
    #[serde(default = "default_dispersion")]
    pub dispersion: DispersionSource,
}

fn default_dispersion() -> DispersionSource {
    DispersionSource::Sellmeier
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpSection {
    /// Spectral amplitude FWHM Δ_ω in rad/ps.
    #[serde(default = "default_pump_fwhm")]
    pub fwhm_rad_per_ps: f64,
    #[serde(default = "default_pump_duration")]
    pub duration_ps: f64,
    /// Crystal-integrated gain value as quoted for the fitted experiments.
    pub gain_s_per_m: f64,
}

fn default_pump_fwhm() -> f64 {
    presets::PUMP_FWHM * 1e-12
}

fn default_pump_duration() -> f64 {
    presets::PUMP_DURATION * 1e12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub center_nm: f64,
    pub width_nm: f64,
    pub edge_nm: f64,
    pub peak: f64,
    pub arm: Arm,
}

impl Default for FilterSection {
    fn default() -> Self {
        Self { center_nm: 763.3, width_nm: 1.2, edge_nm: 0.2, peak: 1.0, arm: Arm::Idler }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputSection {
    pub kind: InputKind,
    /// Photons per pulse on one pixel; derived from power and waist when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub photons: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_mw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waist_um: Option<f64>,
    #[serde(default = "default_pixel_area")]
    pub pixel_area_um2: f64,
    /// Spectral amplitude FWHM in rad/ps; defaults to √2 times the pump width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fwhm_rad_per_ps: Option<f64>,
}

fn default_pixel_area() -> f64 {
    presets::PIXEL_AREA * 1e12
}

impl Default for InputSection {
    fn default() -> Self {
        Self {
            kind: InputKind::Vacuum,
            photons: None,
            power_mw: None,
            waist_um: None,
            pixel_area_um2: default_pixel_area(),
            fwhm_rad_per_ps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsSection {
    /// Modes in the exact laws; all retained modes when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<usize>,
    /// Upper end of the mean/std sweep over input photons; no sweep when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_max_photons: Option<f64>,
    #[serde(default = "default_sweep_points")]
    pub sweep_points: usize,
    /// Relative gain band drawn around the sweep.
    #[serde(default = "default_gain_band")]
    pub gain_band: f64,
}

fn default_sweep_points() -> usize {
    75
}

fn default_gain_band() -> f64 {
    0.05
}

impl Default for StatsSection {
    fn default() -> Self {
        Self {
            modes: None,
            sweep_max_photons: None,
            sweep_points: default_sweep_points(),
            gain_band: default_gain_band(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// CSV with columns `count,frequency` (unit bins).
    pub histogram_csv: String,
    pub lower_s_per_m: f64,
    pub upper_s_per_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    /// Coherent "A" with a thermal spot between its legs.
    Experiment,
    /// Every pixel receives the [input] state.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub name: String,
    pub x_px: usize,
    pub y_px: usize,
    pub width_px: usize,
    pub height_px: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSection {
    pub kind: SceneKind,
    pub width_px: usize,
    pub height_px: usize,
    pub pitch_um: f64,
    pub thermal_photons: f64,
    pub coherent_photons: f64,
    /// Replaces the built-in regions when non-empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub regions: Vec<RegionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vacuum_region: Option<String>,
}

impl Default for SceneSection {
    fn default() -> Self {
        Self {
            kind: SceneKind::Experiment,
            width_px: ExperimentScene::SIZE,
            height_px: ExperimentScene::SIZE,
            pitch_um: presets::PIXEL_AREA.sqrt() * 1e6,
            thermal_photons: presets::N_THERMAL,
            coherent_photons: presets::N_COHERENT,
            regions: Vec::new(),
            vacuum_region: Some("vacuum".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub shots: usize,
    pub seed: u64,
    /// Modes sampled per pixel and used for histogram predictions.
    pub modes: usize,
    pub m_max: usize,
    pub grid_points: usize,
    pub n_max_mode: usize,
    pub n_max_total: usize,
    pub sigma_counts: f64,
    pub chunk_shots: usize,
    pub stack_file: String,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            shots: 10_000,
            seed: 1,
            modes: presets::IMAGING_MODES,
            m_max: presets::M_MAX,
            grid_points: 1024,
            n_max_mode: dfgamp::photonstats::DEFAULT_MODE_N_MAX,
            n_max_total: dfgamp::photonstats::DEFAULT_TOTAL_N_MAX,
            sigma_counts: presets::READOUT_SIGMA,
            chunk_shots: dfgamp::imaging::DEFAULT_CHUNK_SHOTS,
            stack_file: "stack.pstk".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MrafSection {
    pub size_px: usize,
    pub mixing: f64,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub beam_waist_frac: f64,
    /// `"A"` for the bundled letter, or a CSV of `size_px` rows of intensities.
    pub target: String,
    pub stall_threshold: f64,
}

impl Default for MrafSection {
    fn default() -> Self {
        let o = MrafOptions::default();
        Self {
            size_px: 512,
            mixing: o.mixing,
            iterations: o.iterations,
            seed: o.seed,
            beam_waist_frac: o.beam_waist,
            target: "A".into(),
            stall_threshold: o.stall_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| bad(e.to_string()))
    }

    /// Field-level checks that do not need any computation.
    pub fn validate(&self) -> Result<(), CliError> {
        let c = &self.crystal;
        for (name, v) in
            [("crystal.signal_nm", c.signal_nm), ("crystal.idler_nm", c.idler_nm), ("crystal.length_mm", c.length_mm)]
        {
            if !(v > 0.0) {
                return Err(bad(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(t) = c.theta_deg {
            if !(t > 0.0 && t < 90.0) {
                return Err(bad(format!("crystal.theta_deg must lie in (0, 90), got {t}")));
            }
        }
        let p = &self.pump;
        if !(p.fwhm_rad_per_ps > 0.0) || !(p.duration_ps >= 0.0) || !(p.gain_s_per_m >= 0.0) {
            return Err(bad("pump.fwhm_rad_per_ps must be positive, pump.duration_ps and pump.gain_s_per_m >= 0"));
        }
        let f = &self.filter;
        if !(f.width_nm > 0.0) || !(f.edge_nm > 0.0) || !(0.0..=1.0).contains(&f.peak) {
            return Err(bad("filter.width_nm and filter.edge_nm must be positive and filter.peak in [0, 1]"));
        }
        let i = &self.input;
        if let Some(n) = i.photons {
            if !(n >= 0.0) {
                return Err(bad(format!("input.photons must be >= 0, got {n}")));
            }
        }
        let s = &self.simulation;
        if s.grid_points < 256 {
            return Err(bad(format!("simulation.grid_points must be >= 256, got {}", s.grid_points)));
        }
        if s.modes == 0 || s.modes > s.m_max + 1 {
            return Err(bad(format!("simulation.modes must lie in [1, m_max + 1 = {}]", s.m_max + 1)));
        }
        if !(s.sigma_counts >= 0.0) {
            return Err(bad("simulation.sigma_counts must be >= 0"));
        }
        if self.stats.sweep_points < 2 {
            return Err(bad("stats.sweep_points must be >= 2"));
        }
        let sc = &self.scene;
        if sc.width_px == 0 || sc.height_px == 0 || !(sc.pitch_um > 0.0) {
            return Err(bad("scene.width_px, scene.height_px and scene.pitch_um must be positive"));
        }
        if sc.kind == SceneKind::Experiment
            && (sc.width_px != ExperimentScene::SIZE || sc.height_px != ExperimentScene::SIZE)
        {
            return Err(bad(format!("scene.kind = \"experiment\" needs a {0}x{0} window", ExperimentScene::SIZE)));
        }
        let m = &self.mraf;
        if !m.size_px.is_power_of_two() {
            return Err(bad(format!("mraf.size_px must be a power of two, got {}", m.size_px)));
        }
        if !(0.0..=1.0).contains(&m.mixing) {
            return Err(bad(format!("mraf.mixing must lie in [0, 1], got {}", m.mixing)));
        }
        Ok(())
    }

    pub fn crystal(&self) -> Result<CrystalConfig, CliError> {
        let c = &self.crystal;
        let mut crystal = CrystalConfig::bbo(c.signal_nm, c.idler_nm, c.length_mm * 1e-3, c.theta_deg.unwrap_or(45.0));
        if c.theta_deg.is_none() {
            crystal.theta_deg = solve_phase_matching_angle(&crystal)?;
        }
        Ok(crystal)
    }

    pub fn setup(&self) -> Result<Setup, CliError> {
        let crystal = self.crystal()?;
        let dispersion = match self.crystal.dispersion {
            DispersionSource::Sellmeier => dispersion_params(&crystal, crystal.theta_deg)?,
            DispersionSource::Tabulated853 => presets::tabulated_853(&crystal)?,
            DispersionSource::Tabulated840 => presets::tabulated_840(&crystal)?,
        };
        let f = &self.filter;
        Ok(Setup {
            dispersion,
            pump: PumpSpectrum {
                fwhm: self.pump.fwhm_rad_per_ps * 1e12,
                peak_amplitude: 1.0,
                duration_s: self.pump.duration_ps * 1e-12,
            },
            g: gain_per_length(self.pump.gain_s_per_m, crystal.length_m),
            filter: FilterModel::band_nm(f.center_nm, f.width_nm, f.edge_nm, f.peak),
            arm: f.arm,
            input_fwhm: self.input_fwhm(),
            sigma: self.simulation.sigma_counts,
            m_max: self.simulation.m_max,
            grid_points: self.simulation.grid_points,
            crystal,
        })
    }

    pub fn input_fwhm(&self) -> f64 {
        self.input
            .fwhm_rad_per_ps
            .map(|w| w * 1e12)
            .unwrap_or(std::f64::consts::SQRT_2 * self.pump.fwhm_rad_per_ps * 1e12)
    }

    /// Photons per pulse on one pixel for the [input] section.
    pub fn input_photons(&self, crystal: &CrystalConfig) -> Result<f64, CliError> {
        let i = &self.input;
        if i.kind == InputKind::Vacuum {
            return Ok(0.0);
        }
        match (i.photons, i.power_mw, i.waist_um) {
            (Some(n), _, _) => Ok(n),
            (None, Some(p), Some(w)) => Ok(input_photon_number(
                p * 1e-3,
                self.pump.duration_ps * 1e-12,
                i.pixel_area_um2 * 1e-12,
                w * 1e-6,
                crystal.omega_s(),
            )),
            _ => Err(bad("input needs either photons or power_mw with waist_um")),
        }
    }

    /// Scene and analysis regions.
    pub fn scene(&self) -> Result<(Scene, Vec<Region>), CliError> {
        let sc = &self.scene;
        let (scene, mut regions) = match sc.kind {
            SceneKind::Experiment => {
                let mut p = ExperimentScene::build(sc.thermal_photons, sc.coherent_photons)?;
                p.scene.pitch_um = sc.pitch_um;
                let regions = p.regions();
                (p.scene, regions)
            }
            SceneKind::Uniform => {
                let mut s = Scene::vacuum(sc.width_px, sc.height_px, sc.pitch_um)?;
                let crystal = self.crystal()?;
                let n = self.input_photons(&crystal)?;
                if n > 0.0 {
                    let src = s.add_source(self.input.kind, n)?;
                    s.paint(src, |_, _| 1.0)?;
                }
                let all = Region::rect_in("all", sc.width_px, sc.height_px, 0, 0, sc.width_px, sc.height_px)?;
                (s, vec![all])
            }
        };
        if !sc.regions.is_empty() {
            regions = sc
                .regions
                .iter()
                .map(|r| Region::rect(&r.name, &scene, r.x_px, r.y_px, r.width_px, r.height_px))
                .collect::<dfgamp::Result<Vec<_>>>()?;
        }
        Ok((scene, regions))
    }

    pub fn imaging_model(&self, model: &dfgamp::pipeline::Model) -> ImagingModel {
        let mut m = ImagingModel::from_model(model, self.simulation.modes);
        m.n_max_mode = self.simulation.n_max_mode;
        m.n_max_total = self.simulation.n_max_total;
        m
    }

    pub fn mraf_options(&self) -> MrafOptions {
        let m = &self.mraf;
        MrafOptions {
            mixing: m.mixing,
            iterations: m.iterations,
            seed: m.seed,
            beam_waist: m.beam_waist_frac,
            stall_threshold: m.stall_threshold,
        }
    }

    /// Resolves a path relative to the directory holding the config file.
    pub fn resolve(base: &Path, p: &str) -> PathBuf {
        let path = Path::new(p);
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            base.join(path)
        }
    }
}
