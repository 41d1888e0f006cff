//! Closed-form planning tools checked against full propagation and the
//! collision structure of unfavourable shift ratios.

use std::f64::consts::PI;

use ndarray::Array2;

use entangler_core::analytics::{
    closed_form_fidelity, collision_scan, frequency_error_fidelity,
    nonideal_measurement_fidelity, shift_ratio, WeightConvention,
};
use entangler_core::dynamics::{propagate_state, DecoherenceRates, IntegratorConfig, StaticHamiltonian};
use entangler_core::hamiltonian::{DriveSpec, QutritType, SystemParams, TargetSpec};
use entangler_core::hilbert::{ModeTruncation, Operator, StateVector};
use entangler_core::protocol::{run_protocol, run_protocol_with, MeasurementSpec, RunOptions};
use entangler_core::C64;

fn fig3(trunc: ModeTruncation) -> SystemParams {
    SystemParams {
        qutrit: QutritType::Lambda,
        omega_a: 70.0,
        omega_b: 89.0,
        omega_e: 20.0,
        omega_f: 100.0,
        g_a: 1.0,
        g_b: 1.0,
        g_ab: 0.0,
        truncation: trunc,
    }
}

/// Moves the shift ratio by retuning the middle level only.
fn with_ratio(ratio: f64, trunc: ModeTruncation) -> SystemParams {
    let mut p = fig3(trunc);
    // ratio = (omega_f - omega_b) / (omega_f - omega_e - omega_a).
    p.omega_e = p.omega_f - p.omega_a - (p.omega_f - p.omega_b) / ratio;
    p
}

#[test]
fn closed_form_tracks_the_full_propagation() {
    let target = TargetSpec::noon(2);
    let p = fig3(target.default_truncation());
    let analytic = closed_form_fidelity(&p, &target, 1e-3, WeightConvention::Poisson).unwrap();
    let drive = DriveSpec::planned(&p, &target, 1e-3).unwrap();
    let meas = MeasurementSpec::for_params(&p);
    let numeric = run_protocol(&p, &target, &drive, &meas, &DecoherenceRates::none())
        .unwrap()
        .fidelity;
    assert!(
        (analytic - numeric).abs() < 0.01,
        "analytic = {analytic}, numeric = {numeric}"
    );
    assert!(analytic > 0.98 && numeric > 0.98);
}

#[test]
fn unit_shift_ratio_exposes_the_known_collisions() {
    // At ratio 1 the tone-1 lattice nearly closes along (1, -2):
    // slope_n = 16/75 and slope_m = 2/19 leave a gap of 4/1425 per cell.
    let mut p = fig3(ModeTruncation::new(10, 10));
    p.omega_b = 90.0;
    assert!((shift_ratio(&p).unwrap() - 1.0).abs() < 1e-12);
    let cell_gap = 4.0 / 1425.0;

    let single = TargetSpec::noon(1);
    let report = collision_scan(&p, &single, 5e-3, 5.0).unwrap();
    let hit = report
        .entries
        .iter()
        .find(|e| e.tone == 1 && (e.n, e.m) == (0, 2))
        .expect("label (0,2) collides with the first tone");
    assert!((hit.detuning + cell_gap).abs() < 1e-12, "detuning = {}", hit.detuning);

    let double = TargetSpec::noon(2);
    let report = collision_scan(&p, &double, 5e-3, 5.0).unwrap();
    for (label, cells) in [((1, 2), 1.0), ((0, 4), 2.0)] {
        let hit = report
            .entries
            .iter()
            .find(|e| e.tone == 1 && (e.n, e.m) == label)
            .unwrap_or_else(|| panic!("label {label:?} collides with the first tone"));
        assert!((hit.detuning + cells * cell_gap).abs() < 1e-12);
    }
    // The lattice scan reports the same closing direction.
    assert!(report
        .lattice
        .iter()
        .any(|s| s.tone == 1 && (s.n_k, s.m_k) == (1, 2)));
}

#[test]
fn reference_parameters_are_collision_free_for_the_bell_target() {
    let p = fig3(ModeTruncation::new(10, 10));
    assert!((shift_ratio(&p).unwrap() - 1.1).abs() < 1e-12);
    let target = TargetSpec::bell();
    let report = collision_scan(&p, &target, 1e-3, 5.0).unwrap();
    assert!(report.entries.is_empty(), "entries: {:?}", report.entries);
    // Any formally closing lattice direction must leave the label grid in
    // both senses from its tone's target, or the entry scan above would
    // have caught a member of the ray.
    for sol in &report.lattice {
        let (tn, tm) = if sol.tone == 1 {
            (target.n_1, target.m_1)
        } else {
            (target.n_2, target.m_2)
        };
        let t = p.truncation;
        let forward_out = tn + sol.n_k > t.n_max_a || tm < sol.m_k;
        let backward_out = tn < sol.n_k || tm + sol.m_k > t.n_max_b;
        assert!(
            forward_out && backward_out,
            "lattice direction {sol:?} has an in-grid member"
        );
    }
}

#[test]
fn simple_rational_shift_ratios_dent_the_analytic_fidelity() {
    let target = TargetSpec::noon(2);
    let trunc = ModeTruncation::new(10, 10);
    let omega = 1e-3;
    let score = |ratio: f64| {
        closed_form_fidelity(&with_ratio(ratio, trunc), &target, omega, WeightConvention::Poisson)
            .unwrap()
    };
    // Sample a small neighbourhood: the exact closure sits within ~0.02 of
    // the nominal rational because of the small secondary shifts.
    let dip = |ratio: f64| {
        [-0.02, -0.01, 0.0, 0.01, 0.02]
            .iter()
            .map(|d| score(ratio + d))
            .fold(f64::INFINITY, f64::min)
    };
    let clean = score(1.7);
    assert!(clean > 0.97, "expected a quiet ratio, F = {clean}");
    for ratio in [1.0, 1.5, 2.0] {
        assert!(
            dip(ratio) < clean - 0.01,
            "ratio {ratio}: dip {} vs clean {clean}",
            dip(ratio)
        );
    }
}

#[test]
fn frequency_error_formula_matches_two_level_propagation() {
    let omega = 5e-3;
    let (w1, w2) = (80.0, 100.0);
    let varphi = PI / 4.0;
    let pulse = PI / (2.0 * omega);
    let amp = |detuning: f64| {
        let mut h = Array2::<C64>::zeros((2, 2));
        h[(0, 1)] = C64::new(omega, 0.0);
        h[(1, 0)] = C64::new(omega, 0.0);
        h[(1, 1)] = C64::new(detuning, 0.0);
        let source = StaticHamiltonian::new(Operator::new(h));
        let cfg = IntegratorConfig {
            dt: pulse / 20_000.0,
            monitor_every: 1_000,
        };
        let out = propagate_state(&source, &StateVector::basis(2, 0), pulse, &cfg).unwrap();
        out.amplitudes[1].norm()
    };
    for eps in [2e-5, 1e-4] {
        let f = frequency_error_fidelity(eps, omega, w1, w2, varphi);
        let a1 = amp(w1 * eps);
        let a2 = amp(w2 * eps);
        let exact = (0.5 * a1 + 0.5 * a2).powi(2);
        assert!(
            (f.exact - exact).abs() < 1e-6,
            "eps' = {eps}: formula {} vs propagated {exact}",
            f.exact
        );
        assert!(f.renormalized >= f.exact - 1e-12);
    }
}

#[test]
fn readout_tilt_cost_has_under_half_the_stated_coefficient() {
    // A tilt of the measured direction costs fidelity at leading order
    // theta^2 with coefficient 1/(2P) - 1 once the free relative phase is
    // optimised out; the published estimate 1/P - 3/4 overstates the
    // penalty by more than a factor of two. The shipped small-angle helper
    // keeps the published form, so this pins both facts: the helper's
    // formula and its bias against propagation.
    let target = TargetSpec::bell();
    let p = fig3(target.default_truncation());
    let drive = DriveSpec::planned(&p, &target, 5e-3).unwrap();
    let opts = RunOptions {
        resonant_only: true,
        ..RunOptions::default()
    };
    let none = DecoherenceRates::none();
    let level = MeasurementSpec::for_params(&p).level;
    let ideal = run_protocol_with(
        &p,
        &target,
        &drive,
        &MeasurementSpec::ideal(level),
        &none,
        &opts,
    )
    .unwrap();
    let theta = 0.05;
    let tilted_spec = MeasurementSpec {
        level,
        theta_1: theta,
        theta_2: 0.0,
    };
    let tilted = run_protocol_with(&p, &target, &drive, &tilted_spec, &none, &opts).unwrap();

    let drop = ideal.fidelity - tilted.fidelity;
    let p0 = ideal.success_probability;
    let true_coeff = 1.0 / (2.0 * p0) - 1.0;
    let paper_coeff = 1.0 / p0 - 0.75;
    assert!(
        (drop - true_coeff * theta * theta).abs() < 5e-5,
        "drop = {drop}, leading order = {}",
        true_coeff * theta * theta
    );
    assert!((drop - paper_coeff * theta * theta).abs() > 5e-3);
    let estimate = nonideal_measurement_fidelity(theta, p0);
    assert!((estimate - (1.0 - paper_coeff * theta * theta)).abs() < 1e-12);
}
