use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dfgamp::photonstats::{multimode_law, sample_readout, ModeInput};
use dfgamp::pipeline::Model;
use dfgamp::presets::Setup;
use dfgamp::scene::CountHistogram;
use dfgamp_cli::RunConfig;
use tempfile::TempDir;

const CRYSTAL: &str = r#"
[crystal]
signal_nm = 853.0
idler_nm = 753.0
length_mm = 3.0
theta_deg = 29.01
dispersion = "tabulated_853"
"#;

const PUMP: &str = r#"
[pump]
fwhm_rad_per_ps = 1.38
duration_ps = 2.96
gain_s_per_m = 8.4218e-13
"#;

const FILTER: &str = r#"
[filter]
center_nm = 749.0
width_nm = 13.0
edge_nm = 0.5
"#;

fn repo_configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_config(dir: &Path, name: &str, sections: &[&str]) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, sections.concat()).unwrap();
    path
}

fn dfgamp(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfgamp"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}\nstderr: {}", o.status.code(), String::from_utf8_lossy(&o.stderr));
}

fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn key_value(path: &Path, key: &str) -> f64 {
    let text = fs::read_to_string(path).unwrap();
    let line = text.lines().find(|l| l.starts_with(&format!("{key},"))).unwrap();
    line.split(',').nth(1).unwrap().parse().unwrap()
}

#[test]
fn bundled_configs_round_trip() {
    for name in ["zero_d.toml", "two_d.toml"] {
        let cfg = RunConfig::load(&repo_configs().join(name)).unwrap();
        let again = RunConfig::parse(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg, "{name}");
    }
}

#[test]
fn missing_section_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &[PUMP, FILTER]);
    let o = dfgamp(&["stats"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("crystal"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &[CRYSTAL, PUMP, "\n[filter]\ncentre_nm = 749.0\n"]);
    let o = dfgamp(&["modes"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("centre_nm"));
}

#[test]
fn missing_files_are_io_errors() {
    let tmp = TempDir::new().unwrap();
    let o = dfgamp(&["modes"], &tmp.path().join("absent.toml"), &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(4));

    let cfg = write_config(tmp.path(), "c.toml", &[CRYSTAL, PUMP, FILTER]);
    let o = dfgamp(&["analyze"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("stack.pstk"));
}

#[test]
fn modes_writes_forty_one_singular_values() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    ok(&dfgamp(&["modes"], &repo_configs().join("zero_d.toml"), &out));
    let lambda = fs::read_to_string(out.join("lambda.csv")).unwrap();
    assert_eq!(lambda.lines().count(), 42);
    for f in ["modes.csv", "gaussian.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn zero_photon_thermal_run_matches_vacuum_byte_for_byte() {
    let tmp = TempDir::new().unwrap();
    let thermal =
        write_config(tmp.path(), "t.toml", &[CRYSTAL, PUMP, FILTER, "\n[input]\nkind = \"thermal\"\nphotons = 0.0\n"]);
    let vacuum = write_config(tmp.path(), "v.toml", &[CRYSTAL, PUMP, FILTER, "\n[input]\nkind = \"vacuum\"\n"]);
    let (a, b) = (tmp.path().join("t"), tmp.path().join("v"));
    ok(&dfgamp(&["stats"], &thermal, &a));
    ok(&dfgamp(&["stats"], &vacuum, &b));
    let (x, y) = (dir_contents(&a), dir_contents(&b));
    assert!(x.contains_key("law.csv"));
    assert_eq!(x, y);
}

fn small_scene(tmp: &Path) -> PathBuf {
    write_config(
        tmp,
        "s.toml",
        &[
            CRYSTAL,
            PUMP,
            FILTER,
            "\n[input]\nkind = \"coherent\"\nphotons = 20.0\n",
            "\n[scene]\nkind = \"uniform\"\nwidth_px = 12\nheight_px = 10\n",
            "\n[simulation]\nshots = 300\nseed = 5\nmodes = 10\nchunk_shots = 64\n",
        ],
    )
}

#[test]
fn simulation_reruns_are_bit_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_scene(tmp.path());
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    ok(&dfgamp(&["simulate"], &cfg, &a));
    ok(&dfgamp(&["simulate", "--threads", "1"], &cfg, &b));
    ok(&dfgamp(&["simulate", "--seed", "6"], &cfg, &c));
    let stack = |d: &Path| fs::read(d.join("stack.pstk")).unwrap();
    assert_eq!(stack(&a), stack(&b));
    assert_ne!(stack(&a), stack(&c));
    assert_eq!(stack(&a).len(), 5 + 4 + 4 + 4 + 8 + 12 * 10 * 300 * 4);
    assert!(a.join("stack.toml").exists());
}

#[test]
fn analysis_is_idempotent() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_scene(tmp.path());
    let out = tmp.path().join("out");
    ok(&dfgamp(&["simulate"], &cfg, &out));
    ok(&dfgamp(&["analyze"], &cfg, &out));
    let first = dir_contents(&out);
    ok(&dfgamp(&["analyze"], &cfg, &out));
    assert_eq!(dir_contents(&out), first);
    let regions = fs::read_to_string(out.join("regions.csv")).unwrap();
    assert!(regions.lines().nth(1).unwrap().starts_with("all,120,36000,"));
    assert!(first.contains_key("hist_all.csv") && first.contains_key("mean_map.csv"));
}

#[test]
fn gain_fit_recovers_the_generating_gain() {
    let tmp = TempDir::new().unwrap();
    let model = Model::build(Setup::zero_d().unwrap()).unwrap();
    let inputs: Vec<ModeInput> = model.transmissions.iter().map(|&t| ModeInput::vacuum(t)).collect();
    let law = multimode_law(&inputs, &model.gains, 512, 2048).unwrap();
    let h = CountHistogram::from_samples(&sample_readout(&law, model.setup.sigma, 17, 100_000));
    let mut csv = String::from("count,frequency\n");
    for (k, c) in h.counts.iter().enumerate() {
        csv.push_str(&format!("{},{}\n", h.first_bin + k as i64, c));
    }
    fs::write(tmp.path().join("vacuum.csv"), csv).unwrap();
    let fit = "\n[fit]\nhistogram_csv = \"vacuum.csv\"\nlower_s_per_m = 5e-13\nupper_s_per_m = 1.2e-12\n";
    let cfg = write_config(tmp.path(), "f.toml", &[CRYSTAL, PUMP, FILTER, fit]);
    let out = tmp.path().join("out");
    ok(&dfgamp(&["fit-gain"], &cfg, &out));
    let g = key_value(&out.join("fit.csv"), "gain_s_per_m");
    assert!((g / 8.4218e-13 - 1.0).abs() < 0.01, "fitted {g:e}");
}

#[test]
fn mraf_reports_about_twenty_percent() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = dfgamp(&["mraf"], &repo_configs().join("two_d.toml"), &out);
    ok(&o);
    let e = key_value(&out.join("mraf.csv"), "final_error");
    assert!((0.15..=0.25).contains(&e), "error {e}");
    assert!(String::from_utf8_lossy(&o.stdout).contains("signal-region error"));
    let png = fs::read(out.join("phase.png")).unwrap();
    assert_eq!(&png[1..4], b"PNG");
}
