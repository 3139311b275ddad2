use approx::assert_relative_eq;
use dfgamp::dispersion::CrystalConfig;
use dfgamp::jsa::{build_jsa, phase_mismatch, pump_amplitude, sinc, GaussianJsaParams, GridSpec, JsaGrid};
use dfgamp::modes::*;
use dfgamp::pipeline::Model;
use dfgamp::presets::Setup;
use proptest::prelude::*;

fn relative_frobenius(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn gaussian_grid(p: &GaussianJsaParams, n: usize, half_width: f64) -> JsaGrid {
    JsaGrid::from_fn(&GridSpec { n, half_width }, |a, b| p.kernel(a, b)).unwrap()
}

#[test]
fn zero_d_basis_is_orthonormal_and_ordered() {
    let m = Model::build(Setup::zero_d().unwrap()).unwrap();
    let b = &m.basis;
    assert_eq!(b.len(), 41);
    assert!(b.lambda.windows(2).all(|w| w[0] >= w[1]) && b.lambda[40] >= 0.0);
    for set in [&b.psi, &b.phi] {
        for i in 0..b.len() {
            assert!((b.inner(&set[i], &set[i]) - 1.0).abs() < 1e-8);
            for j in 0..i {
                assert!(b.inner(&set[i], &set[j]).abs() < 1e-6);
            }
        }
    }
    for m in 0..b.len() {
        let peak = b.psi[m].iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
        assert!(peak > 0.0);
    }
}

#[test]
fn full_basis_reconstructs_the_kernel() {
    let s = Setup::zero_d().unwrap();
    let spec = GridSpec { n: 256, ..s.grid() };
    let jsa = build_jsa(&s.dispersion, s.crystal.length_m, &s.pump, &spec).unwrap();
    let basis = svd_modes(&jsa, 255).unwrap();
    assert!(relative_frobenius(&basis.reconstruct(), &jsa.values) < 1e-10);
}

#[test]
fn forty_one_modes_reconstruct_a_fast_decaying_kernel() {
    let p = GaussianJsaParams::from_widths(1.0, 3.0);
    let jsa = gaussian_grid(&p, 512, 25.0);
    let basis = svd_modes(&jsa, 40).unwrap();
    assert!(relative_frobenius(&basis.reconstruct(), &jsa.values) < 1e-3);
}

#[test]
fn separable_kernel_has_rank_one() {
    let jsa = JsaGrid::from_fn(&GridSpec { n: 256, half_width: 8.0 }, |a, b| {
        (-(a - 0.5) * (a - 0.5)).exp() * (-b * b / 3.0).exp() * (1.0 + 0.1 * b)
    })
    .unwrap();
    let basis = svd_modes(&jsa, 5).unwrap();
    assert!(basis.lambda[1] < 1e-12 * basis.lambda[0]);
    assert!(relative_frobenius(&basis.truncated(1).reconstruct(), &jsa.values) < 1e-12);
}

#[test]
fn gaussian_kernel_matches_closed_form_singular_values() {
    let p = GaussianJsaParams::from_widths(0.584e12, 96.44e12);
    let r = 2.5 * (p.delta1 * p.delta2).sqrt() * 41f64.sqrt();
    let basis = svd_modes(&gaussian_grid(&p, 1024, r), 20).unwrap();
    for m in 0..=20 {
        let ana = analytic_singular_value(&p, m);
        assert!((basis.lambda[m] / ana - 1.0).abs() < 1e-4, "m = {m}: {} vs {ana}", basis.lambda[m]);
    }
}

#[test]
fn full_dispersion_stays_within_a_few_percent_of_the_analytic_law() {
    let s = Setup::zero_d().unwrap();
    let p = s.gaussian_params();
    let m = Model::build(s).unwrap();
    let dev: Vec<f64> = (0..=40).map(|k| (m.basis.lambda[k] / analytic_singular_value(&p, k) - 1.0).abs()).collect();
    assert!(dev.iter().all(|&d| d < 0.06), "{dev:?}");
}

#[test]
fn mode_shape_distortion_comes_from_second_order_dispersion() {
    let s = Setup::zero_d().unwrap();
    let p = s.gaussian_params();
    let jsa = build_jsa(&s.dispersion.without_gvd(), s.crystal.length_m, &s.pump, &s.grid()).unwrap();
    let flat = svd_modes(&jsa, 4).unwrap();
    let full = Model::build(s).unwrap().basis;
    let ana = analytic_modes(&p, 4, &flat.omega);
    for k in 0..=4 {
        let o_flat = flat.inner(&ana.psi[k], &flat.psi[k]).powi(2);
        let o_full = full.inner(&ana.psi[k], &full.psi[k]).powi(2);
        assert!(o_flat > 0.97, "m = {k}: overlap without GVD {o_flat}");
        assert!(o_full <= o_flat + 1e-3, "m = {k}: {o_full} vs {o_flat}");
    }
    assert!(full.inner(&ana.psi[1], &full.psi[1]).powi(2) > 0.95);
}

#[test]
fn analytic_modes_are_orthonormal() {
    let p = GaussianJsaParams::from_widths(0.584e12, 96.44e12);
    let r = 2.5 * (p.delta1 * p.delta2).sqrt() * 41f64.sqrt();
    let axis = GridSpec { n: 1024, half_width: r }.axis();
    let b = analytic_modes(&p, 40, &axis);
    for i in 0..=40 {
        assert!((b.inner(&b.psi[i], &b.psi[i]) - 1.0).abs() < 1e-8, "m = {i}");
        for j in 0..i {
            assert!(b.inner(&b.psi[i], &b.psi[j]).abs() < 1e-6);
        }
    }
    assert!(b.psi[0].iter().all(|&v| v > 0.0));
    let mid = b.psi[1].len() / 2;
    assert!(b.psi[1][mid - 1] < 0.0 && b.psi[1][mid] > 0.0);
}

#[test]
fn fluorescence_per_mode_from_quoted_gain() {
    let s = Setup::zero_d().unwrap();
    let (g, l) = (s.g, s.crystal.length_m);
    let m = Model::build(s).unwrap();
    let x = g * m.basis.lambda[0] * l;
    assert_relative_eq!(m.gains.gains[0] - 1.0, x.sinh() * x.sinh(), max_relative = 1e-12);
    let f = m.gains.fluorescence();
    assert!(f.windows(2).all(|w| w[1] < w[0]));
    assert!(f[40] < 0.35 * f[0]);
}

#[test]
fn zero_gain_leaves_every_mode_unamplified() {
    let m = Model::build(Setup::zero_d().unwrap()).unwrap();
    let g = mode_gains(&m.basis, 0.0, 3e-3).unwrap();
    assert!(g.gains.iter().all(|&v| v == 1.0) && g.x.iter().all(|&v| v == 0.0));
    assert!(mode_gains(&m.basis, -1.0, 3e-3).is_err());
}

#[test]
fn gain_coefficient_examples() {
    let cfg = CrystalConfig::bbo(853.0, 753.0, 3e-3, 29.01);
    assert_eq!(gain_coefficient(&cfg, 0.0).unwrap(), 0.0);
    let a = implied_pump_amplitude(&cfg, 8.4218e-13 / 3e-3).unwrap();
    assert!(a > 0.0);
    assert_relative_eq!(gain_coefficient(&cfg, a).unwrap(), 8.4218e-13 / 3e-3, max_relative = 1e-12);
    assert_relative_eq!(gain_coefficient(&cfg, 2.0 * a).unwrap(), 2.0 * 8.4218e-13 / 3e-3, max_relative = 1e-12);
}

fn magnus_setup() -> (Setup, GridSpec, f64) {
    let s = Setup::zero_d().unwrap();
    let spec = GridSpec { n: 64, half_width: 1e14 };
    let jsa = JsaGrid::from_fn(&spec, |a, b| {
        pump_amplitude(a + b, &s.pump) * sinc(phase_mismatch(a, b, &s.dispersion) * s.crystal.length_m / 2.0)
    })
    .unwrap();
    let lambda0 = svd_modes(&jsa, 0).unwrap().lambda[0];
    (s, spec, lambda0)
}

#[test]
fn zero_gain_propagation_is_the_identity() {
    let (s, spec, _) = magnus_setup();
    let t = propagate_transfer_matrix(&s.dispersion, s.crystal.length_m, &s.pump, &spec, 0.0, 4).unwrap();
    let n = t.dim();
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((t.matrix[(i, j)].re - want).abs() < 1e-14 && t.matrix[(i, j)].im.abs() < 1e-14);
        }
    }
}

#[test]
fn magnus_amplification_holds_up_to_sixteen() {
    let (s, spec, lambda0) = magnus_setup();
    let l = s.crystal.length_m;
    let g = 4f64.acosh() / (lambda0 * l);
    let c = MagnusComparison::run(&s.dispersion, l, &s.pump, &spec, g).unwrap();
    assert_relative_eq!(c.amplification_magnus, 16.0, max_relative = 1e-9);
    assert!((c.amplification_direct / c.amplification_magnus - 1.0).abs() < 0.03);
}

proptest! {
    #[test]
    fn bogoliubov_identity(lambda in proptest::collection::vec(0.0f64..5e12, 1..20), g in 0.0f64..1e-9) {
        let p = GainProfile::from_lambda(&lambda, g, 3e-3);
        for m in 0..p.len() {
            prop_assert!((p.u[m] * p.u[m] - p.v[m] * p.v[m] - 1.0).abs() < 1e-12 * p.gains[m]);
            prop_assert!(p.gains[m] >= 1.0);
            prop_assert!(p.x[m] >= 0.0 && p.x[m] < 1.0);
        }
    }

    #[test]
    fn gains_follow_singular_value_order(mut lambda in proptest::collection::vec(0.0f64..5e12, 2..20)) {
        lambda.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let p = GainProfile::from_lambda(&lambda, 2.8e-10, 3e-3);
        prop_assert!(p.gains.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn analytic_singular_values_are_geometric(d1 in 1e11f64..1e13, ratio in 1.5f64..300.0) {
        let p = GaussianJsaParams::from_widths(d1, d1 * ratio);
        let q = (ratio - 1.0) / (ratio + 1.0);
        for m in 0..40 {
            let r = analytic_singular_value(&p, m + 1) / analytic_singular_value(&p, m);
            prop_assert!((r / q - 1.0).abs() < 1e-12);
        }
    }
}
