//! The four subcommands. Each returns the full CSV as bytes so the caller
//! owns where it goes (stdout or a file) and reruns stay byte-identical.

use std::time::Instant;

use entangler_core::analytics::{
    closed_form_fidelity, collision_scan, shift_ratio, WeightConvention,
};
use entangler_core::hamiltonian::{
    dispersive_shifts, drive_frequencies, xi_drive_frequencies, QutritType,
};
use entangler_core::protocol::{run_batch, run_scenario, Scenario};

use crate::config::{expand_sweep, RawConfig};
use crate::output::{num, render};
use crate::CliError;

const RUN_COLUMNS: [&str; 18] = [
    "id",
    "qutrit",
    "n_1",
    "m_1",
    "n_2",
    "m_2",
    "omega",
    "gamma",
    "kappa_a",
    "kappa_b",
    "g_ab",
    "epsilon",
    "epsilon_prime",
    "theta_1",
    "theta_2",
    "success_probability",
    "fidelity",
    "wall_ms",
];

fn qutrit_name(q: QutritType) -> &'static str {
    match q {
        QutritType::Lambda => "lambda",
        QutritType::Delta => "delta",
        QutritType::Xi => "xi",
    }
}

fn run_row(id: &str, s: &Scenario, probability: f64, fidelity: f64, wall_ms: Option<f64>) -> Vec<String> {
    vec![
        id.to_string(),
        qutrit_name(s.params.qutrit).to_string(),
        s.target.n_1.to_string(),
        s.target.m_1.to_string(),
        s.target.n_2.to_string(),
        s.target.m_2.to_string(),
        num(s.drive.omega),
        num(s.rates.gamma),
        num(s.rates.kappa_a),
        num(s.rates.kappa_b),
        num(s.params.g_ab),
        num(s.drive.epsilon),
        num(s.drive.epsilon_prime),
        num(s.measurement.theta_1),
        num(s.measurement.theta_2),
        num(probability),
        num(fidelity),
        wall_ms.map(|w| format!("{w:.1}")).unwrap_or_default(),
    ]
}

fn reject_sweep(raw: &RawConfig, command: &str) -> Result<(), CliError> {
    if raw.sweep.is_empty() {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "{command} runs a single scenario; drop the [[sweep]] axes or use the sweep command"
        )))
    }
}

pub fn cmd_shifts(raw: &RawConfig, hash: &str) -> Result<Vec<u8>, CliError> {
    reject_sweep(raw, "shifts")?;
    let scenario = raw.resolve()?;
    let p = &scenario.params;
    let shifts = dispersive_shifts(p)?;
    let ratio = shift_ratio(p)?;
    let (omega_1, omega_2) = match p.qutrit {
        QutritType::Xi => xi_drive_frequencies(p, &shifts, &scenario.target)?,
        _ => drive_frequencies(p, &shifts, &scenario.target)?,
    };
    let columns = [
        "id",
        "qutrit",
        "chi_a",
        "chi_a_prime",
        "chi_b",
        "chi_b_prime",
        "shift_ratio",
        "omega_1",
        "omega_2",
    ];
    let row = vec![
        raw.id.clone(),
        qutrit_name(p.qutrit).to_string(),
        num(shifts.chi_a),
        num(shifts.chi_a_prime),
        num(shifts.chi_b),
        num(shifts.chi_b_prime),
        num(ratio),
        num(omega_1),
        num(omega_2),
    ];
    render("shifts", hash, &columns, vec![row])
}

pub fn cmd_simulate(raw: &RawConfig, hash: &str, timing: bool) -> Result<Vec<u8>, CliError> {
    reject_sweep(raw, "simulate")?;
    let scenario = raw.resolve()?;
    let clock = Instant::now();
    let outcome = run_scenario(&scenario)?;
    let wall = timing.then(|| clock.elapsed().as_secs_f64() * 1e3);
    let row = run_row(&raw.id, &scenario, outcome.success_probability, outcome.fidelity, wall);
    render("simulate", hash, &RUN_COLUMNS, vec![row])
}

pub fn cmd_sweep(raw: &RawConfig, hash: &str, timing: bool) -> Result<Vec<u8>, CliError> {
    let points = expand_sweep(raw)?;
    let scenarios = points
        .iter()
        .map(RawConfig::resolve)
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::with_capacity(scenarios.len());
    if timing {
        // Per-point wall clocks only mean something when the points run one
        // at a time, so timing mode trades the thread pool away.
        for s in &scenarios {
            let clock = Instant::now();
            let outcome = run_scenario(s)?;
            let wall = clock.elapsed().as_secs_f64() * 1e3;
            rows.push(run_row(&raw.id, s, outcome.success_probability, outcome.fidelity, Some(wall)));
        }
    } else {
        for (s, outcome) in scenarios.iter().zip(run_batch(&scenarios)) {
            let outcome = outcome?;
            rows.push(run_row(&raw.id, s, outcome.success_probability, outcome.fidelity, None));
        }
    }
    render("sweep", hash, &RUN_COLUMNS, rows)
}

pub fn cmd_collisions(raw: &RawConfig, hash: &str) -> Result<Vec<u8>, CliError> {
    if raw.sweep.iter().any(|a| a.param == "system.ratio") {
        return ratio_sweep(raw, hash);
    }
    reject_sweep(raw, "collisions (without a system.ratio axis)")?;
    let scenario = raw.resolve()?;
    let threshold = raw.collision_threshold.unwrap_or(5.0);
    let report = collision_scan(
        &scenario.params,
        &scenario.target,
        scenario.drive.omega,
        threshold,
    )?;
    let columns = ["id", "kind", "tone", "n", "m", "detuning", "peak_population"];
    let mut rows = Vec::new();
    for e in &report.entries {
        rows.push(vec![
            raw.id.clone(),
            "entry".to_string(),
            e.tone.to_string(),
            e.n.to_string(),
            e.m.to_string(),
            num(e.detuning),
            num(e.peak_population),
        ]);
    }
    for l in &report.lattice {
        rows.push(vec![
            raw.id.clone(),
            "lattice".to_string(),
            l.tone.to_string(),
            l.n_k.to_string(),
            l.m_k.to_string(),
            num(l.detuning),
            String::new(),
        ]);
    }
    render("collisions", hash, &columns, rows)
}

/// Closed-form fidelity along a dispersive-slope-ratio axis (with any other
/// axes crossed in): the planning scan for picking collision-free operating
/// points.
fn ratio_sweep(raw: &RawConfig, hash: &str) -> Result<Vec<u8>, CliError> {
    let columns = ["id", "qutrit", "n_1", "m_1", "n_2", "m_2", "omega", "ratio", "closed_form_fidelity"];
    let mut rows = Vec::new();
    for point in expand_sweep(raw)? {
        let scenario = point.resolve()?;
        let p = &scenario.params;
        let fidelity = closed_form_fidelity(
            p,
            &scenario.target,
            scenario.drive.omega,
            WeightConvention::Poisson,
        )?;
        rows.push(vec![
            raw.id.clone(),
            qutrit_name(p.qutrit).to_string(),
            scenario.target.n_1.to_string(),
            scenario.target.m_1.to_string(),
            scenario.target.n_2.to_string(),
            scenario.target.m_2.to_string(),
            num(scenario.drive.omega),
            num(shift_ratio(p)?),
            num(fidelity),
        ]);
    }
    render("collisions", hash, &columns, rows)
}
