//! The drive-then-measure protocol: prepare the qutrit superposition over
//! the two tone sources, integrate the rotating-frame dynamics for a
//! quarter Rabi period (or two sequential windows), project the qutrit onto
//! the sink level, and score the post-selected resonator state against the
//! two-label target.

use ndarray::Array2;

use crate::dynamics::{
    collapse_channels, propagate_density, propagate_state, DecoherenceRates, HamiltonianSource,
    IntegratorConfig,
};
use crate::error::CoreError;
use crate::hamiltonian::{
    DriveSpec, RotatingDriveHamiltonian, SystemParams, TargetSpec,
};
use crate::hilbert::{coherent_state, DensityMatrix, ModeTruncation, QutritLevel, StateVector};
use crate::{Result, C64};

/// Success probabilities below this are treated as "never succeeds".
pub const SUCCESS_FLOOR: f64 = 1e-12;

/// Which qutrit level the dispersive readout post-selects, with the two
/// misalignment angles of the measured direction. `theta_1` tilts the
/// direction away from the nominal level; `theta_2` splits the leakage
/// between the two remaining levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementSpec {
    pub level: QutritLevel,
    pub theta_1: f64,
    pub theta_2: f64,
}

impl MeasurementSpec {
    pub fn ideal(level: QutritLevel) -> Self {
        Self {
            level,
            theta_1: 0.0,
            theta_2: 0.0,
        }
    }

    /// Ideal readout of the topology's sink level.
    pub fn for_params(p: &SystemParams) -> Self {
        Self::ideal(p.qutrit.sink_level())
    }

    /// Partner levels that receive the misaligned weight, in descending
    /// bare energy: the higher partner carries `sin(theta_2)`, the lower
    /// `cos(theta_2)`.
    fn partners(level: QutritLevel) -> (QutritLevel, QutritLevel) {
        match level {
            QutritLevel::F => (QutritLevel::E, QutritLevel::G),
            QutritLevel::E => (QutritLevel::F, QutritLevel::G),
            QutritLevel::G => (QutritLevel::F, QutritLevel::E),
        }
    }

    /// Components of the measured qutrit direction, indexed g, e, f.
    pub fn measured_direction(&self) -> [C64; 3] {
        let mut mu = [C64::new(0.0, 0.0); 3];
        let (hi, lo) = Self::partners(self.level);
        mu[self.level.index()] = C64::new(self.theta_1.cos(), 0.0);
        mu[hi.index()] = C64::new(self.theta_1.sin() * self.theta_2.sin(), 0.0);
        mu[lo.index()] = C64::new(self.theta_1.sin() * self.theta_2.cos(), 0.0);
        mu
    }
}

/// Composite qutrit + modes state entering the measurement.
#[derive(Debug, Clone)]
pub enum SystemState {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

/// Post-selected two-mode resonator state.
#[derive(Debug, Clone)]
pub enum ResonatorState {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl ResonatorState {
    pub fn dim(&self) -> usize {
        match self {
            ResonatorState::Pure(v) => v.dim(),
            ResonatorState::Mixed(r) => r.dim(),
        }
    }
}

/// Target `cos(varphi) |n1 m1> + sin(varphi) |n2 m2>` on the resonator
/// space, with its mixing angle and flat label indices.
#[derive(Debug, Clone)]
pub struct TargetState {
    pub state: StateVector,
    pub varphi: f64,
    pub idx_1: usize,
    pub idx_2: usize,
}

/// Resonator-space target state determined by the label weights of the
/// coherent seeds.
pub fn target_state(target: &TargetSpec, trunc: &ModeTruncation) -> Result<TargetState> {
    target.validate(trunc)?;
    let varphi = target.varphi();
    let idx_1 = trunc.flat_modes(target.n_1, target.m_1);
    let idx_2 = trunc.flat_modes(target.n_2, target.m_2);
    let mut state = StateVector::zeros(trunc.dim_modes());
    state.amplitudes[idx_1] = C64::new(varphi.cos(), 0.0);
    state.amplitudes[idx_2] = C64::new(varphi.sin(), 0.0);
    Ok(TargetState {
        state,
        varphi,
        idx_1,
        idx_2,
    })
}

/// Protocol input state: the equal superposition of the two tone source
/// levels, with both modes in coherent seeds.
pub fn initial_state(p: &SystemParams, target: &TargetSpec) -> Result<StateVector> {
    let t = p.truncation;
    let seed_a = coherent_state(C64::new(target.alpha, 0.0), t.n_max_a)?;
    let seed_b = coherent_state(C64::new(target.beta, 0.0), t.n_max_b)?;
    let modes = seed_a.tensor(&seed_b);
    let legs = p.qutrit.tone_levels();
    let mut qutrit = StateVector::zeros(3);
    let half = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    qutrit.amplitudes[legs[0].0.index()] = half;
    qutrit.amplitudes[legs[1].0.index()] = half;
    Ok(qutrit.tensor(&modes))
}

/// Projects the qutrit onto the measured direction and returns the
/// renormalised resonator state together with the outcome probability.
///
/// Probabilities below [`SUCCESS_FLOOR`] are rejected: the post-selected
/// state would be numerical noise.
pub fn projective_measurement(
    state: &SystemState,
    spec: &MeasurementSpec,
    trunc: &ModeTruncation,
) -> Result<(ResonatorState, f64)> {
    let dm = trunc.dim_modes();
    let mu = spec.measured_direction();
    match state {
        SystemState::Pure(psi) => {
            if psi.dim() != 3 * dm {
                return Err(CoreError::DimensionMismatch {
                    expected: 3 * dm,
                    got: psi.dim(),
                });
            }
            let mut v = StateVector::zeros(dm);
            for l in 0..3 {
                let weight = mu[l].conj();
                if weight.norm_sqr() == 0.0 {
                    continue;
                }
                for i in 0..dm {
                    v.amplitudes[i] += weight * psi.amplitudes[l * dm + i];
                }
            }
            let probability = v.norm().powi(2);
            if probability < SUCCESS_FLOOR {
                return Err(CoreError::MeasurementNeverSucceeds { probability });
            }
            Ok((ResonatorState::Pure(v.normalized()), probability))
        }
        SystemState::Mixed(rho) => {
            if rho.dim() != 3 * dm {
                return Err(CoreError::DimensionMismatch {
                    expected: 3 * dm,
                    got: rho.dim(),
                });
            }
            let mut v = Array2::<C64>::zeros((dm, dm));
            for l in 0..3 {
                for lp in 0..3 {
                    let weight = mu[l].conj() * mu[lp];
                    if weight.norm_sqr() == 0.0 {
                        continue;
                    }
                    for i in 0..dm {
                        for j in 0..dm {
                            v[(i, j)] += weight * rho.entries[(l * dm + i, lp * dm + j)];
                        }
                    }
                }
            }
            let probability: f64 = (0..dm).map(|i| v[(i, i)].re).sum();
            if probability < SUCCESS_FLOOR {
                return Err(CoreError::MeasurementNeverSucceeds { probability });
            }
            let scale = C64::new(1.0 / probability, 0.0);
            Ok((
                ResonatorState::Mixed(DensityMatrix::new(v.mapv(|z| z * scale))),
                probability,
            ))
        }
    }
}

/// Fidelity of the post-selected state against the best relative-phase
/// member of the target family: the overlap is maximised over the free
/// phase between the two target labels in closed form.
pub fn fidelity(state: &ResonatorState, target: &TargetState) -> f64 {
    let c = target.varphi.cos();
    let s = target.varphi.sin();
    match state {
        ResonatorState::Pure(v) => {
            let a1 = v.amplitudes[target.idx_1].norm();
            let a2 = v.amplitudes[target.idx_2].norm();
            (c * a1 + s * a2).powi(2)
        }
        ResonatorState::Mixed(rho) => {
            let p11 = rho.entries[(target.idx_1, target.idx_1)].re;
            let p22 = rho.entries[(target.idx_2, target.idx_2)].re;
            let coherence = rho.entries[(target.idx_1, target.idx_2)].norm();
            c * c * p11 + s * s * p22 + 2.0 * c * s * coherence
        }
    }
}

/// Fock-label populations `P(n, m)` of the post-selected state.
pub fn fock_populations(state: &ResonatorState, trunc: &ModeTruncation) -> Array2<f64> {
    let mut out = Array2::zeros((trunc.dim_a(), trunc.dim_b()));
    for n in 0..trunc.dim_a() {
        for m in 0..trunc.dim_b() {
            let idx = trunc.flat_modes(n, m);
            out[(n, m)] = match state {
                ResonatorState::Pure(v) => v.amplitudes[idx].norm_sqr(),
                ResonatorState::Mixed(rho) => rho.entries[(idx, idx)].re,
            };
        }
    }
    out
}

/// Everything the protocol reports for one scenario.
#[derive(Debug, Clone)]
pub struct ProtocolOutcome {
    pub state: ResonatorState,
    pub success_probability: f64,
    pub fidelity: f64,
    pub fock_populations: Array2<f64>,
}

/// Knobs that change how the dynamics are integrated without changing the
/// physical scenario.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Keep only the two resonant couplings (secular approximation).
    pub resonant_only: bool,
    /// Samples per period of the fastest phase when planning the step.
    pub points_per_period: f64,
    /// Full override of the planned step.
    pub integrator: Option<IntegratorConfig>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            resonant_only: false,
            points_per_period: 20.0,
            integrator: None,
        }
    }
}

/// Runs the full protocol with default integration options.
pub fn run_protocol(
    p: &SystemParams,
    target: &TargetSpec,
    drive: &DriveSpec,
    measurement: &MeasurementSpec,
    rates: &DecoherenceRates,
) -> Result<ProtocolOutcome> {
    run_protocol_with(p, target, drive, measurement, rates, &RunOptions::default())
}

/// Runs the full protocol: closed-system RK4 when all rates vanish,
/// Lindblad otherwise.
pub fn run_protocol_with(
    p: &SystemParams,
    target: &TargetSpec,
    drive: &DriveSpec,
    measurement: &MeasurementSpec,
    rates: &DecoherenceRates,
    options: &RunOptions,
) -> Result<ProtocolOutcome> {
    let source = if options.resonant_only {
        RotatingDriveHamiltonian::resonant_only(p, drive, target)?
    } else {
        RotatingDriveHamiltonian::new(p, drive, target)?
    };
    let window = drive.pulse_duration();
    let total = drive.total_duration();
    let cfg = options.integrator.unwrap_or_else(|| {
        IntegratorConfig::plan_with_resolution(
            source.max_frequency(),
            window,
            options.points_per_period,
        )
    });
    let psi0 = initial_state(p, target)?;
    let goal = target_state(target, &p.truncation)?;

    // Sequential pulses are integrated as two smooth segments so no RK4
    // step ever samples both sides of the tone switch.
    let windows = source.sequential_windows();
    let measured = if rates.is_zero() {
        let psi = match &windows {
            Some((first, second)) => {
                let mid = propagate_state(first, &psi0, window, &cfg)?;
                propagate_state(second, &mid, window, &cfg)?
            }
            None => propagate_state(&source, &psi0, total, &cfg)?,
        };
        SystemState::Pure(psi)
    } else {
        let channels = collapse_channels(p, rates)?;
        let rho0 = psi0.outer();
        let rho = match &windows {
            Some((first, second)) => {
                let mid = propagate_density(first, &channels, &rho0, window, &cfg)?;
                propagate_density(second, &channels, &mid, window, &cfg)?
            }
            None => propagate_density(&source, &channels, &rho0, total, &cfg)?,
        };
        SystemState::Mixed(rho)
    };
    let (post, success_probability) = projective_measurement(&measured, measurement, &p.truncation)?;
    let score = fidelity(&post, &goal);
    let populations = fock_populations(&post, &p.truncation);
    Ok(ProtocolOutcome {
        state: post,
        success_probability,
        fidelity: score,
        fock_populations: populations,
    })
}

/// One point of a parameter sweep.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub params: SystemParams,
    pub target: TargetSpec,
    pub drive: DriveSpec,
    pub measurement: MeasurementSpec,
    pub rates: DecoherenceRates,
    pub options: RunOptions,
}

pub fn run_scenario(s: &Scenario) -> Result<ProtocolOutcome> {
    run_protocol_with(
        &s.params,
        &s.target,
        &s.drive,
        &s.measurement,
        &s.rates,
        &s.options,
    )
}

/// Runs scenarios one after the other on the current thread.
pub fn run_batch_serial(scenarios: &[Scenario]) -> Vec<Result<ProtocolOutcome>> {
    scenarios.iter().map(run_scenario).collect()
}

/// Runs scenarios across the thread pool when the `parallel` feature is on
/// (each propagation stays single-threaded); order of results matches the
/// input either way.
#[cfg(feature = "parallel")]
pub fn run_batch(scenarios: &[Scenario]) -> Vec<Result<ProtocolOutcome>> {
    use rayon::prelude::*;
    scenarios.par_iter().map(run_scenario).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn run_batch(scenarios: &[Scenario]) -> Vec<Result<ProtocolOutcome>> {
    run_batch_serial(scenarios)
}
