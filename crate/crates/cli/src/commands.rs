use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use dfgamp::imaging::{
    letter_a_target, mraf_phase_mask, phase_to_gray, signal_region_box, simulate_streaming, StackAnalyzer, StackHeader,
    StackReader, StackWriter, VacuumReference,
};
use dfgamp::jsa::phase_mismatch;
use dfgamp::modes::analytic_singular_value;
use dfgamp::photonstats::{multimode_law, output_moments, smear_readout, DEFAULT_READOUT_STEP};
use dfgamp::pipeline::Model;
use dfgamp::scene::{fit_gain, mode_contributions, CountHistogram, InputKind};

use crate::config::RunConfig;
use crate::csvout::{key_values, map, Table};
use crate::CliError;

/// Loaded config plus where its relative paths and the outputs live.
pub struct Context {
    pub config: RunConfig,
    pub base: PathBuf,
    pub out: PathBuf,
}

impl Context {
    pub fn new(config: RunConfig, config_path: &Path, out_override: Option<PathBuf>) -> Result<Self, CliError> {
        let base = config_path.parent().map(Path::to_path_buf).unwrap_or_default();
        let out = out_override.unwrap_or_else(|| RunConfig::resolve(&base, &config.output.dir));
        std::fs::create_dir_all(&out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
        Ok(Self { config, base, out })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn model(&self) -> Result<Model, CliError> {
        Ok(Model::build(self.config.setup()?)?)
    }
}

/// Singular values, mode shapes, JSA and phase-mismatch maps, Gaussian widths.
pub fn modes(ctx: &Context) -> Result<(), CliError> {
    let model = ctx.model()?;
    let setup = &model.setup;
    let p = setup.gaussian_params();
    let grid = setup.grid();
    key_values(
        &ctx.path("gaussian.csv"),
        &[
            ("theta_deg", setup.crystal.theta_deg.to_string()),
            ("pump_nm", setup.crystal.lambda_p_nm.to_string()),
            ("delta1_per_s", p.delta1.to_string()),
            ("delta2_per_s", p.delta2.to_string()),
            ("delta_pm_per_s", p.delta_pm.to_string()),
            ("tau_s", p.tau.to_string()),
            ("grid_half_width_per_s", grid.half_width.to_string()),
            ("grid_points", grid.n.to_string()),
            ("g_per_length", setup.g.to_string()),
        ],
    )?;

    let b = &model.basis;
    let mut t = Table::create(
        &ctx.path("lambda.csv"),
        &["m", "lambda_num", "lambda_ana", "rel_dev", "gain", "transmission", "overlap2"],
    )?;
    for m in 0..b.len() {
        let ana = analytic_singular_value(&p, m);
        t.row([
            m.to_string(),
            b.lambda[m].to_string(),
            ana.to_string(),
            ((b.lambda[m] - ana) / ana).to_string(),
            model.gains.gains[m].to_string(),
            model.transmissions[m].to_string(),
            (model.overlaps[m] * model.overlaps[m]).to_string(),
        ])?;
    }
    t.finish()?;

    let shown = b.len().min(10);
    let mut header = vec!["omega_per_s".to_string()];
    header.extend((0..shown).map(|m| format!("psi_{m}")));
    header.extend((0..shown).map(|m| format!("phi_{m}")));
    let mut t = Table::create(&ctx.path("modes.csv"), &header)?;
    for k in 0..b.omega.len() {
        let mut row = vec![b.omega[k]];
        row.extend((0..shown).map(|m| b.psi[m][k]));
        row.extend((0..shown).map(|m| b.phi[m][k]));
        t.row(row)?;
    }
    t.finish()?;

    let n = model.jsa.n();
    let stride = n.div_ceil(256);
    let idx: Vec<usize> = (0..n).step_by(stride).collect();
    let omega = &model.jsa.omega;
    for (name, f) in [
        ("jsa.csv", &(|i: usize, j: usize| model.jsa.get(i, j)) as &dyn Fn(usize, usize) -> f64),
        ("mismatch.csv", &|i: usize, j: usize| phase_mismatch(omega[i], omega[j], &setup.dispersion)),
    ] {
        let mut header = vec!["omega_i\\omega_s".to_string()];
        header.extend(idx.iter().map(|&j| omega[j].to_string()));
        let mut t = Table::create(&ctx.path(name), &header)?;
        for &i in &idx {
            let mut row = vec![omega[i]];
            row.extend(idx.iter().map(|&j| f(i, j)));
            t.row(row)?;
        }
        t.finish()?;
    }
    Ok(())
}

/// Exact detected law, its readout-smeared density, moments, mode contributions and the
/// optional input-photon sweep.
pub fn stats(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let model = ctx.model()?;
    let k = cfg.stats.modes.unwrap_or(model.basis.len()).min(model.basis.len());
    let n_input = cfg.input_photons(&model.setup.crystal)?;
    let kind = cfg.input.kind;
    let inputs = model.inputs(n_input, kind, k)?;
    let gains = model.gains_for(k);
    let law = multimode_law(&inputs, &gains, cfg.simulation.n_max_mode, cfg.simulation.n_max_total)?;

    let mut t = Table::create(&ctx.path("law.csv"), &["n", "probability"])?;
    for (n, p) in law.pmf().iter().enumerate() {
        t.row([n.to_string(), p.to_string()])?;
    }
    t.finish()?;

    let density = smear_readout(&law, model.setup.sigma, DEFAULT_READOUT_STEP)?;
    let mut t = Table::create(&ctx.path("readout.csv"), &["count", "density"])?;
    for (x, d) in density.points() {
        t.row([x, d])?;
    }
    t.finish()?;

    let formula = output_moments(&inputs, &gains)?;
    key_values(
        &ctx.path("moments.csv"),
        &[
            ("input_photons", n_input.to_string()),
            ("modes", k.to_string()),
            ("mean", law.mean().to_string()),
            ("variance", law.variance().to_string()),
            ("g2", law.g2().to_string()),
            ("mean_formula", formula.mean.to_string()),
            ("variance_formula", formula.variance.to_string()),
            ("readout_mean", density.mean().to_string()),
            ("readout_variance", density.variance().to_string()),
        ],
    )?;

    if n_input > 0.0 {
        let c = mode_contributions(&inputs, &gains)?;
        let mut t =
            Table::create(&ctx.path("contributions.csv"), &["m", "transmission", "overlap2", "gain", "contribution"])?;
        for m in 0..k {
            t.row([
                m.to_string(),
                model.transmissions[m].to_string(),
                (model.overlaps[m] * model.overlaps[m]).to_string(),
                gains.gains[m].to_string(),
                c[m].to_string(),
            ])?;
        }
        t.finish()?;
    }

    if let (Some(max), false) = (cfg.stats.sweep_max_photons, kind == InputKind::Vacuum) {
        let band = cfg.stats.gain_band;
        let g = model.setup.g;
        let variants = [model.clone(), model.with_gain(g * (1.0 - band)), model.with_gain(g * (1.0 + band))];
        let mut t = Table::create(
            &ctx.path("sweep.csv"),
            &["input_photons", "mean", "std", "mean_low_gain", "std_low_gain", "mean_high_gain", "std_high_gain"],
        )?;
        let points = cfg.stats.sweep_points;
        for s in 0..points {
            let n = max * s as f64 / (points - 1) as f64;
            let mut row = vec![n];
            for v in &variants {
                let m = output_moments(&v.inputs(n, kind, k)?, &v.gains_for(k))?;
                row.push(m.mean);
                row.push(m.std_dev());
            }
            t.row(row)?;
        }
        t.finish()?;
    }
    Ok(())
}

fn read_histogram(path: &Path) -> Result<CountHistogram, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut pairs = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64, CliError> {
            rec.get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| CliError::Io(format!("{}: malformed row {:?}", path.display(), rec)))
        };
        pairs.push((parse(0)?.round() as i64, parse(1)?));
    }
    if pairs.is_empty() {
        return Err(CliError::Io(format!("{}: empty histogram", path.display())));
    }
    let lo = pairs.iter().map(|p| p.0).min().unwrap();
    let hi = pairs.iter().map(|p| p.0).max().unwrap();
    let mut counts = vec![0.0; (hi - lo + 1) as usize];
    for (b, c) in pairs {
        counts[(b - lo) as usize] += c;
    }
    Ok(CountHistogram { first_bin: lo, counts })
}

/// Maximum-likelihood gain from a measured vacuum histogram.
pub fn fit(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let f = cfg.fit.as_ref().ok_or_else(|| CliError::Config("fit-gain needs a [fit] section".into()))?;
    let observed = read_histogram(&RunConfig::resolve(&ctx.base, &f.histogram_csv))?;
    let model = ctx.model()?;
    let mut vm = model.vacuum_model();
    vm.n_max_mode = cfg.simulation.n_max_mode;
    vm.n_max_total = cfg.simulation.n_max_total;
    let l = model.setup.crystal.length_m;
    let fitres = fit_gain(&observed, &vm, (f.lower_s_per_m / l, f.upper_s_per_m / l))?;
    key_values(
        &ctx.path("fit.csv"),
        &[
            ("gain_s_per_m", (fitres.g * l).to_string()),
            ("g_per_length", fitres.g.to_string()),
            ("nll", fitres.nll.to_string()),
            ("evaluations", fitres.evaluations.to_string()),
        ],
    )?;
    let probs = vm.bin_probabilities(fitres.g, observed.first_bin, observed.counts.len())?;
    let total = observed.total();
    let mut t = Table::create(&ctx.path("fit_histogram.csv"), &["count", "frequency", "model_probability"])?;
    for (k, (c, p)) in observed.counts.iter().zip(&probs).enumerate() {
        t.row([(observed.first_bin + k as i64).to_string(), (c / total).to_string(), p.to_string()])?;
    }
    t.finish()
}

/// Streams a shot stack to disk and writes the config next to it.
pub fn simulate(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let model = ctx.model()?;
    let im = cfg.imaging_model(&model);
    let (scene, _) = cfg.scene()?;
    let s = &cfg.simulation;
    let shots = u32::try_from(s.shots).map_err(|_| CliError::Config("simulation.shots exceeds u32".into()))?;
    let path = ctx.path(&s.stack_file);
    let file = File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let header = StackHeader { width: scene.width as u32, height: scene.height as u32, shots, seed: s.seed };
    let mut writer = StackWriter::new(BufWriter::new(file), header)?;
    simulate_streaming(&scene, &im, s.shots, s.seed, s.chunk_shots, |chunk| writer.write_frames(chunk))?;
    writer.finish()?;
    std::fs::write(path.with_extension("toml"), cfg.to_toml()?)?;
    Ok(())
}

/// Mean and variance maps, region table and region histograms with model overlay.
pub fn analyze(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let (scene, regions) = cfg.scene()?;
    let path = ctx.path(&cfg.simulation.stack_file);
    let file = File::open(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut reader = StackReader::new(BufReader::new(file))?;
    let h = reader.header;
    if h.width as usize != scene.width || h.height as usize != scene.height {
        return Err(CliError::Config(format!(
            "stack is {}x{} but the scene is {}x{}",
            h.width, h.height, scene.width, scene.height
        )));
    }
    let vacuum = match &cfg.scene.vacuum_region {
        Some(name) if regions.iter().any(|r| &r.name == name) => VacuumReference::Region(name.clone()),
        _ => VacuumReference::None,
    };
    let mut an = StackAnalyzer::new(scene.width, scene.height, &regions, vacuum)?;
    while let Some(chunk) = reader.next_chunk(cfg.simulation.chunk_shots)? {
        an.push(&chunk)?;
    }
    let st = an.finish()?;
    map(&ctx.path("mean_map.csv"), st.width, &st.mean)?;
    map(&ctx.path("variance_map.csv"), st.width, &st.variance)?;

    let mut t =
        Table::create(&ctx.path("regions.csv"), &["region", "pixels", "samples", "mean", "variance", "g2_corr"])?;
    for r in &st.regions {
        t.row([
            r.name.clone(),
            r.pixels.to_string(),
            r.samples.to_string(),
            r.mean.to_string(),
            r.variance.to_string(),
            r.g2_corr.map(|g| g.to_string()).unwrap_or_default(),
        ])?;
    }
    t.finish()?;

    let model = ctx.model()?;
    let im = cfg.imaging_model(&model);
    for (r, rs) in regions.iter().zip(&st.regions) {
        let (kind, n) = scene.pixel_state(r.pixels[r.pixels.len() / 2]);
        let hist = &rs.histogram;
        let probs = im.predict_bins(kind, n, hist.first_bin, hist.counts.len())?;
        let freq = hist.normalized();
        let mut t =
            Table::create(&ctx.path(&format!("hist_{}.csv", r.name)), &["count", "frequency", "model_probability"])?;
        for k in 0..freq.len() {
            t.row([(hist.first_bin + k as i64).to_string(), freq[k].to_string(), probs[k].to_string()])?;
        }
        t.finish()?;
    }
    Ok(())
}

fn read_target(path: &Path, n: usize) -> Result<Vec<f64>, CliError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut values = Vec::with_capacity(n * n);
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != n {
            return Err(CliError::Config(format!("{}: rows must have {n} values", path.display())));
        }
        for v in rec.iter() {
            values.push(v.trim().parse::<f64>().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?);
        }
    }
    if values.len() != n * n {
        return Err(CliError::Config(format!("{}: expected {n} rows", path.display())));
    }
    Ok(values)
}

/// SLM phase mask as PNG and CSV, plus the per-iteration error log.
pub fn mraf(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let n = cfg.mraf.size_px;
    let (target, sr) = if cfg.mraf.target == "A" {
        letter_a_target(n)
    } else {
        let t = read_target(&RunConfig::resolve(&ctx.base, &cfg.mraf.target), n)?;
        let sr = signal_region_box(&t, n, n / 20);
        (t, sr)
    };
    let res = mraf_phase_mask(&target, &sr, n, &cfg.mraf_options())?;
    if res.stalled {
        eprintln!("warning: phase retrieval stalled at {:.3} signal-region error", res.final_error());
    }
    let gray = phase_to_gray(&res.phase);
    let img = image::GrayImage::from_raw(n as u32, n as u32, gray).expect("buffer matches the mask size");
    img.save(ctx.path("phase.png")).map_err(|e| CliError::Io(e.to_string()))?;
    map(&ctx.path("phase.csv"), n, &res.phase)?;
    map(&ctx.path("intensity.csv"), n, &res.intensity)?;
    let mut t = Table::create(&ctx.path("errors.csv"), &["iteration", "error"])?;
    for (k, e) in res.errors.iter().enumerate() {
        t.row([k.to_string(), e.to_string()])?;
    }
    t.finish()?;
    key_values(
        &ctx.path("mraf.csv"),
        &[
            ("final_error", res.final_error().to_string()),
            ("efficiency", res.efficiency.to_string()),
            ("stalled", res.stalled.to_string()),
        ],
    )?;
    println!("signal-region error {:.4}", res.final_error());
    Ok(())
}
