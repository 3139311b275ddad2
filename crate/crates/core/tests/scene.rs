use approx::assert_relative_eq;
use dfgamp::jsa::GridSpec;
use dfgamp::modes::{analytic_modes, GainProfile};
use dfgamp::photonstats::{multimode_law, sample_readout, InputState, ModeInput};
use dfgamp::pipeline::Model;
use dfgamp::presets::{self, Setup};
use dfgamp::scene::*;
use dfgamp::units::omega_from_nm;
use dfgamp::Error;
use proptest::prelude::*;
use std::sync::LazyLock;

static ZERO_D: LazyLock<Model> = LazyLock::new(|| Model::build(Setup::zero_d().unwrap()).unwrap());

fn zero_d() -> &'static Model {
    &ZERO_D
}

#[test]
fn flat_filter_transmits_every_mode() {
    let m = zero_d();
    let s = &m.setup;
    for arm in [Arm::Idler, Arm::Signal] {
        let t = mode_transmission(&m.basis, &FilterModel::flat(1.0), s.detected_carrier(), arm);
        assert!(t.iter().all(|&v| (v - 1.0).abs() < 1e-6));
    }
}

#[test]
fn band_filter_passes_the_leading_modes() {
    let m = zero_d();
    let t = &m.transmissions;
    assert!(t.iter().all(|&v| (0.0..=1.0).contains(&v)));
    assert!(t[0] > 0.9, "T_0 = {}", t[0]);
    assert!(t.iter().all(|&v| v <= t[0] + 1e-12));
    assert!(t[40] < 0.5 * t[0]);
}

#[test]
fn band_filter_shape() {
    let f = FilterModel::band_nm(749.0, 13.0, 0.5, 0.9);
    assert_relative_eq!(f.transmission(omega_from_nm(749.0)), 0.9, max_relative = 1e-5);
    assert!(f.transmission(omega_from_nm(700.0)) < 1e-12);
    assert!(f.transmission(omega_from_nm(800.0)) < 1e-12);
    let half = |nm: f64| f.transmission(omega_from_nm(nm)) / 0.9;
    assert!(half(742.6) > 0.5 && half(741.9) < 0.5);
}

#[test]
fn matched_gaussian_input_fills_the_first_mode() {
    let p = Setup::zero_d().unwrap().gaussian_params();
    let axis = GridSpec { n: 1024, half_width: 20.0 / p.tau }.axis();
    let basis = analytic_modes(&p, 6, &axis);
    let field =
        InputField { kind: InputKind::Coherent, power_w: 1e-3, fwhm: 2.0 * 2f64.ln().sqrt() / p.tau, waist_m: 1e-4 };
    let o = mode_overlap(&field, &basis, Arm::Idler);
    assert!((o[0] - 1.0).abs() < 1e-9, "O_0 = {}", o[0]);
    for (m, v) in o.iter().enumerate().skip(1) {
        assert!(v.abs() < 1e-6, "O_{m} = {v}");
    }
}

#[test]
fn overlap_weights_obey_bessel_inequality() {
    let m = zero_d();
    for f in [0.3, 1.0, 3.0, 30.0] {
        let field = InputField { kind: InputKind::Coherent, power_w: 0.0, fwhm: f * 1.38e12, waist_m: 0.0 };
        let w: f64 = mode_overlap(&field, &m.basis, m.setup.arm).iter().map(|o| o * o).sum();
        assert!(w <= 1.0 + 1e-9 && w > 0.0, "Σ|O|² = {w}");
    }
}

#[test]
fn photons_per_pixel() {
    let hbar = 1.054_571_817e-34;
    let w = omega_from_nm(853.0);
    let n = input_photon_number(2e-3, 2.96e-12, presets::PIXEL_AREA, presets::BEAM_WAIST, w);
    let by_hand = 2.0 * 2e-3 * 2.96e-12 * 66e-12 / (hbar * w * 140e-6 * 140e-6 * std::f64::consts::PI);
    assert_relative_eq!(n, by_hand, max_relative = 1e-9);
    assert_relative_eq!(n, 54.50, max_relative = 1e-3);
    assert_eq!(input_photon_number(0.0, 2.96e-12, 66e-12, 140e-6, w), 0.0);
}

#[test]
fn zero_photons_give_vacuum_inputs() {
    let m = zero_d();
    for kind in [InputKind::Vacuum, InputKind::Coherent, InputKind::Thermal] {
        let inputs = mode_inputs(0.0, &m.overlaps, &m.transmissions, kind).unwrap();
        assert!(inputs.iter().all(|i| i.state == InputState::Vacuum));
    }
    let v = mode_inputs(50.0, &m.overlaps, &m.transmissions, InputKind::Vacuum).unwrap();
    assert!(v.iter().all(|i| i.state == InputState::Vacuum));
    assert!(mode_inputs(1.0, &[0.8, 0.8], &[1.0, 1.0], InputKind::Coherent).is_err());
    assert!(mode_inputs(1.0, &[0.5], &[1.0, 1.0], InputKind::Coherent).is_err());
}

#[test]
fn mode_inputs_split_photons_by_overlap() {
    let inputs = mode_inputs(10.0, &[0.6, 0.0, 0.8], &[0.9, 0.5, 0.1], InputKind::Thermal).unwrap();
    assert_eq!(inputs[0], ModeInput { state: InputState::Thermal { nbar: 10.0 * 0.36 }, transmission: 0.9 });
    assert_eq!(inputs[1].photons(), 0.0);
    assert_relative_eq!(inputs[2].photons(), 6.4, max_relative = 1e-12);
}

#[test]
fn contribution_examples() {
    let gains = GainProfile::from_lambda(&[3.0, 2.0, 1.0], 0.3, 1.0);
    let single = mode_inputs(5.0, &[0.0, 1.0, 0.0], &[1.0; 3], InputKind::Coherent).unwrap();
    assert_eq!(mode_contributions(&single, &gains).unwrap(), vec![0.0, 1.0, 0.0]);

    let equal = GainProfile::from_lambda(&[2.0; 3], 0.3, 1.0);
    let o = [0.5, 0.3, 0.1];
    let inputs = mode_inputs(5.0, &o, &[1.0; 3], InputKind::Coherent).unwrap();
    let c = mode_contributions(&inputs, &equal).unwrap();
    let w: f64 = o.iter().map(|v| v * v).sum();
    for k in 0..3 {
        assert_relative_eq!(c[k], o[k] * o[k] / w, max_relative = 1e-12);
    }

    let vac = mode_inputs(0.0, &o, &[1.0; 3], InputKind::Coherent).unwrap();
    assert!(matches!(mode_contributions(&vac, &gains), Err(Error::NoSignal)));
}

#[test]
fn zero_d_contributions_sum_to_one() {
    let m = zero_d();
    let inputs = m.inputs(presets::N_COHERENT, InputKind::Coherent, 41).unwrap();
    let c = mode_contributions(&inputs, &m.gains).unwrap();
    assert_relative_eq!(c.iter().sum::<f64>(), 1.0, max_relative = 1e-12);
    assert!(c.iter().all(|&v| v >= 0.0));
}

#[test]
fn histogram_from_samples() {
    let h = CountHistogram::from_samples(&[-1.4, 0.2, 0.6, 0.4, 2.51]);
    assert_eq!(h.first_bin, -1);
    assert_eq!(h.counts, vec![1.0, 2.0, 1.0, 0.0, 1.0]);
    assert_eq!(h.total(), 5.0);
    assert_relative_eq!(h.normalized().iter().sum::<f64>(), 1.0);
}

#[test]
fn vacuum_bins_cover_all_mass() {
    let m = zero_d();
    let p = m.vacuum_model().bin_probabilities(m.setup.g, -10, 40).unwrap();
    assert_relative_eq!(p.iter().sum::<f64>(), 1.0, max_relative = 1e-6);
    assert!(p.iter().all(|&v| v >= 0.0));
}

fn synthetic_vacuum(m: &Model, g: f64, seed: u64, shots: usize) -> CountHistogram {
    let gains = GainProfile::from_lambda(&m.basis.lambda, g, m.setup.crystal.length_m);
    let inputs: Vec<ModeInput> = m.transmissions.iter().map(|&t| ModeInput::vacuum(t)).collect();
    let law = multimode_law(&inputs, &gains, 512, 2048).unwrap();
    CountHistogram::from_samples(&sample_readout(&law, m.setup.sigma, seed, shots))
}

#[test]
fn fitted_gain_recovers_the_generating_value() {
    let m = zero_d();
    let g = m.setup.g;
    let h = synthetic_vacuum(m, g, 21, 200_000);
    let fit = fit_gain(&h, &m.vacuum_model(), (0.5 * g, 1.5 * g)).unwrap();
    assert!((fit.g / g - 1.0).abs() < 0.01, "fitted {:e} vs {g:e}", fit.g);
    assert!(fit.nll.is_finite() && fit.evaluations > 10);
}

#[test]
fn fit_pinned_to_the_bracket_is_an_error() {
    let m = zero_d();
    let g = m.setup.g;
    let h = synthetic_vacuum(m, g, 3, 20_000);
    let vm = m.vacuum_model();
    assert!(matches!(fit_gain(&h, &vm, (0.2 * g, 0.5 * g)), Err(Error::BoundarySolution(_))));
    assert!(fit_gain(&h, &vm, (g, 0.5 * g)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn transmissions_stay_in_unit_interval(center in 700.0f64..800.0, width in 0.5f64..30.0, peak in 0.0f64..=1.0) {
        let m = zero_d();
        let f = FilterModel::band_nm(center, width, 0.3, peak);
        let t = mode_transmission(&m.basis, &f, m.setup.detected_carrier(), Arm::Idler);
        prop_assert!(t.iter().all(|&v| (0.0..=peak + 1e-12).contains(&v)));
    }

    #[test]
    fn contributions_are_a_distribution(o in proptest::collection::vec(0.0f64..0.3, 2..10), n in 0.1f64..100.0) {
        let lambda: Vec<f64> = (0..o.len()).map(|k| 1.0 / (1.0 + k as f64)).collect();
        let gains = GainProfile::from_lambda(&lambda, 1.0, 1.0);
        let inputs = mode_inputs(n, &o, &vec![0.7; o.len()], InputKind::Thermal).unwrap();
        match mode_contributions(&inputs, &gains) {
            Ok(c) => prop_assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12),
            Err(e) => prop_assert!(matches!(e, Error::NoSignal)),
        }
    }
}
