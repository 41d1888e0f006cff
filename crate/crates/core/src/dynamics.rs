//! Fixed-step RK4 propagation of Schrodinger and Lindblad dynamics.
//!
//! Hamiltonians enter through [`HamiltonianSource`], which exposes the two
//! products the integrators need (`H psi` and `[H, rho]`) so a structured
//! implementation can stay O(couplings * dim) instead of materialising a
//! dense matrix every stage. Collapse operators are classified once: an
//! operator with at most one entry per row and column (every physical
//! channel here) gets a gather kernel and a shared diagonal damping term;
//! anything else falls back to dense products.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2};

use crate::error::CoreError;
use crate::hamiltonian::{QutritType, SystemParams};
use crate::hilbert::{
    embed, ladder_operator, DensityMatrix, Operator, QutritLevel, StateVector,
};
use crate::{Result, C64};

/// Relative norm drift tolerated during pure-state propagation.
pub const NORM_DRIFT_TOL: f64 = 1e-9;
/// Trace drift tolerated during density-matrix propagation.
pub const TRACE_DRIFT_TOL: f64 = 1e-7;
/// Hermiticity deviation tolerated during density-matrix propagation.
pub const HERMITICITY_TOL: f64 = 1e-9;

/// Time-dependent Hamiltonian as the integrators consume it. Vectors and
/// density matrices are passed as flat row-major slices.
pub trait HamiltonianSource: Sync {
    fn dim(&self) -> usize;

    /// Writes `out = H(t) psi`.
    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]);

    /// Writes `out = H(t) rho - rho H(t)`.
    fn commutator(&self, t: f64, rho: &[C64], out: &mut [C64]);

    /// Largest phase frequency present in the matrix elements; zero when
    /// the source is effectively static.
    fn max_frequency(&self) -> f64;
}

/// Time-independent dense Hamiltonian.
#[derive(Debug, Clone)]
pub struct StaticHamiltonian {
    op: Operator,
}

impl StaticHamiltonian {
    pub fn new(op: Operator) -> Self {
        Self { op }
    }
}

impl HamiltonianSource for StaticHamiltonian {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply(&self, _t: f64, psi: &[C64], out: &mut [C64]) {
        let d = self.op.dim();
        for i in 0..d {
            let row = self.op.entries.row(i);
            let mut acc = C64::new(0.0, 0.0);
            for (j, h) in row.iter().enumerate() {
                acc += h * psi[j];
            }
            out[i] = acc;
        }
    }

    fn commutator(&self, _t: f64, rho: &[C64], out: &mut [C64]) {
        let d = self.op.dim();
        let y = ArrayView2::from_shape((d, d), rho).expect("rho slice matches dim");
        let h = &self.op.entries;
        let comm = h.dot(&y) - y.dot(h);
        out.copy_from_slice(comm.as_slice().expect("contiguous"));
    }

    fn max_frequency(&self) -> f64 {
        0.0
    }
}

/// Step size and monitoring cadence for the RK4 loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    /// Invariant checks (norm / trace / hermiticity) run every this many steps.
    pub monitor_every: usize,
}

impl IntegratorConfig {
    /// Step size that samples the fastest phase twenty times per period
    /// while keeping at least a thousand steps per pulse window, snapped so
    /// an integer number of steps spans the window.
    pub fn plan(max_frequency: f64, window: f64) -> Self {
        Self::plan_with_resolution(max_frequency, window, 20.0)
    }

    pub fn plan_with_resolution(max_frequency: f64, window: f64, points_per_period: f64) -> Self {
        assert!(window > 0.0, "pulse window must be positive");
        let mut dt_max = window / 1000.0;
        if max_frequency > 0.0 {
            dt_max = dt_max.min(2.0 * PI / (points_per_period * max_frequency));
        }
        let steps = (window / dt_max).ceil().max(1.0);
        IntegratorConfig {
            dt: window / steps,
            monitor_every: 50,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(CoreError::InvalidInput("step size must be positive".into()));
        }
        Ok(())
    }
}

/// Decay and photon-loss rates. `uniform` ties the resonator rates to the
/// qutrit rate at the ten-to-one ratio the protocol studies assume.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DecoherenceRates {
    pub gamma: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
}

impl DecoherenceRates {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn uniform(gamma: f64) -> Self {
        Self {
            gamma,
            kappa_a: 0.1 * gamma,
            kappa_b: 0.1 * gamma,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.gamma == 0.0 && self.kappa_a == 0.0 && self.kappa_b == 0.0
    }
}

/// Collapse operators of the given topology: qutrit decay legs, pure
/// dephasing of the two excited levels, and photon loss from both modes.
pub fn collapse_channels(
    p: &SystemParams,
    rates: &DecoherenceRates,
) -> Result<Vec<(f64, Operator)>> {
    let t = p.truncation;
    let iq = Operator::identity(3);
    let ia = Operator::identity(t.dim_a());
    let ib = Operator::identity(t.dim_b());
    let mut out = Vec::new();
    if rates.gamma > 0.0 {
        let legs: &[(QutritLevel, QutritLevel)] = match p.qutrit {
            QutritType::Lambda => &[(QutritLevel::E, QutritLevel::F), (QutritLevel::G, QutritLevel::F)],
            QutritType::Delta => &[
                (QutritLevel::E, QutritLevel::F),
                (QutritLevel::G, QutritLevel::F),
                (QutritLevel::G, QutritLevel::E),
            ],
            QutritType::Xi => &[(QutritLevel::E, QutritLevel::F), (QutritLevel::G, QutritLevel::E)],
        };
        for &(to, from) in legs {
            let flip = Operator::transition(3, to.index(), from.index());
            out.push((rates.gamma, embed(&flip, &ia, &ib)?));
        }
        for level in [QutritLevel::E, QutritLevel::F] {
            let proj = Operator::transition(3, level.index(), level.index());
            out.push((rates.gamma, embed(&proj, &ia, &ib)?));
        }
    }
    if rates.kappa_a > 0.0 {
        out.push((rates.kappa_a, embed(&iq, &ladder_operator(t.n_max_a)?, &ib)?));
    }
    if rates.kappa_b > 0.0 {
        out.push((rates.kappa_b, embed(&iq, &ia, &ladder_operator(t.n_max_b)?)?));
    }
    Ok(out)
}

/// `D[o] rho = o rho o^dag - (o^dag o rho + rho o^dag o) / 2`, dense.
pub fn dissipator(op: &Operator, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if op.dim() != rho.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: op.dim(),
            got: rho.dim(),
        });
    }
    let o = &op.entries;
    let o_dag = op.dagger().entries;
    let q = o_dag.dot(o);
    let sandwich = o.dot(&rho.entries).dot(&o_dag);
    let anti = q.dot(&rho.entries) + rho.entries.dot(&q);
    Ok(DensityMatrix::new(sandwich - anti.mapv(|z| z * 0.5)))
}

/// Schrodinger propagation of `psi0` over `duration` starting at `t = 0`.
///
/// Norm is monitored against its initial value; drift beyond
/// [`NORM_DRIFT_TOL`] aborts, which in practice flags an undersized
/// `points_per_period` or an unaccounted fast phase.
pub fn propagate_state<S: HamiltonianSource + ?Sized>(
    h: &S,
    psi0: &StateVector,
    duration: f64,
    cfg: &IntegratorConfig,
) -> Result<StateVector> {
    let d = h.dim();
    if psi0.dim() != d {
        return Err(CoreError::DimensionMismatch {
            expected: d,
            got: psi0.dim(),
        });
    }
    cfg.validate()?;
    let mut psi: Vec<C64> = psi0.amplitudes.to_vec();
    let reference_norm = norm_of(&psi);
    let mut stage = vec![C64::new(0.0, 0.0); d];
    let mut k1 = stage.clone();
    let mut k2 = stage.clone();
    let mut k3 = stage.clone();
    let mut k4 = stage.clone();

    let rhs = |t: f64, y: &[C64], out: &mut [C64], h: &S| {
        h.apply(t, y, out);
        for z in out.iter_mut() {
            *z *= C64::new(0.0, -1.0);
        }
    };

    let mut t = 0.0;
    let mut steps_done = 0usize;
    while t < duration - 1e-12 * duration.max(1.0) {
        let dt = cfg.dt.min(duration - t);
        rhs(t, &psi, &mut k1, h);
        axpy_into(&mut stage, &psi, &k1, 0.5 * dt);
        rhs(t + 0.5 * dt, &stage, &mut k2, h);
        axpy_into(&mut stage, &psi, &k2, 0.5 * dt);
        rhs(t + 0.5 * dt, &stage, &mut k3, h);
        axpy_into(&mut stage, &psi, &k3, dt);
        rhs(t + dt, &stage, &mut k4, h);
        for i in 0..d {
            psi[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0);
        }
        t += dt;
        steps_done += 1;
        if steps_done % cfg.monitor_every.max(1) == 0 {
            check_norm(&psi, reference_norm, t)?;
        }
    }
    check_norm(&psi, reference_norm, t)?;
    Ok(StateVector::new(psi.into()))
}

/// Lindblad propagation of `rho0` over `duration` starting at `t = 0`.
///
/// Trace and Hermiticity are monitored; drift beyond [`TRACE_DRIFT_TOL`] /
/// [`HERMITICITY_TOL`] aborts.
pub fn propagate_density<S: HamiltonianSource + ?Sized>(
    h: &S,
    collapse: &[(f64, Operator)],
    rho0: &DensityMatrix,
    duration: f64,
    cfg: &IntegratorConfig,
) -> Result<DensityMatrix> {
    let d = h.dim();
    if rho0.dim() != d {
        return Err(CoreError::DimensionMismatch {
            expected: d,
            got: rho0.dim(),
        });
    }
    cfg.validate()?;
    let applier = LindbladApplier::build(collapse, d)?;

    let mut rho: Vec<C64> = rho0.entries.iter().copied().collect();
    let reference_trace = trace_of(&rho, d);
    let n2 = d * d;
    let mut stage = vec![C64::new(0.0, 0.0); n2];
    let mut k1 = stage.clone();
    let mut k2 = stage.clone();
    let mut k3 = stage.clone();
    let mut k4 = stage.clone();

    let mut t = 0.0;
    let mut steps_done = 0usize;
    while t < duration - 1e-12 * duration.max(1.0) {
        let dt = cfg.dt.min(duration - t);
        applier.rhs(h, t, &rho, &mut k1);
        axpy_into(&mut stage, &rho, &k1, 0.5 * dt);
        applier.rhs(h, t + 0.5 * dt, &stage, &mut k2);
        axpy_into(&mut stage, &rho, &k2, 0.5 * dt);
        applier.rhs(h, t + 0.5 * dt, &stage, &mut k3);
        axpy_into(&mut stage, &rho, &k3, dt);
        applier.rhs(h, t + dt, &stage, &mut k4);
        for i in 0..n2 {
            rho[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0);
        }
        t += dt;
        steps_done += 1;
        if steps_done % cfg.monitor_every.max(1) == 0 {
            check_density(&rho, d, reference_trace, t)?;
        }
    }
    check_density(&rho, d, reference_trace, t)?;
    let entries = Array2::from_shape_vec((d, d), rho).expect("length d*d");
    Ok(DensityMatrix::new(entries))
}

fn axpy_into(out: &mut [C64], base: &[C64], k: &[C64], factor: f64) {
    for i in 0..out.len() {
        out[i] = base[i] + k[i] * factor;
    }
}

fn norm_of(psi: &[C64]) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn trace_of(rho: &[C64], d: usize) -> f64 {
    (0..d).map(|i| rho[i * d + i].re).sum()
}

fn check_norm(psi: &[C64], reference: f64, t: f64) -> Result<()> {
    let drift = (norm_of(psi) / reference - 1.0).abs();
    if drift > NORM_DRIFT_TOL {
        return Err(CoreError::NormDrift { drift, t });
    }
    Ok(())
}

fn check_density(rho: &[C64], d: usize, reference: f64, t: f64) -> Result<()> {
    let drift = (trace_of(rho, d) - reference).abs();
    if drift > TRACE_DRIFT_TOL {
        return Err(CoreError::TraceDrift { drift, t });
    }
    let mut deviation = 0.0_f64;
    for i in 0..d {
        for j in i..d {
            let dev = (rho[i * d + j] - rho[j * d + i].conj()).norm();
            deviation = deviation.max(dev);
        }
    }
    if deviation > HERMITICITY_TOL {
        return Err(CoreError::HermiticityDrift { deviation, t });
    }
    Ok(())
}

enum Channel {
    /// Operator with at most one entry per row and column: the sandwich
    /// `o rho o^dag` becomes a gather over entry pairs and `o^dag o` is
    /// diagonal (already folded into the shared damping vector).
    Gather { rate: f64, pairs: Vec<(u32, u32, C64)> },
    /// Anything else: dense products, including its own anticommutator.
    Dense { rate: f64, o: Array2<C64>, o_dag: Array2<C64>, q: Array2<C64> },
}

struct LindbladApplier {
    damp: Vec<f64>,
    channels: Vec<Channel>,
}

impl LindbladApplier {
    fn build(collapse: &[(f64, Operator)], d: usize) -> Result<Self> {
        let mut damp = vec![0.0; d];
        let mut channels = Vec::new();
        for (rate, op) in collapse {
            if *rate == 0.0 {
                continue;
            }
            if op.dim() != d {
                return Err(CoreError::DimensionMismatch {
                    expected: d,
                    got: op.dim(),
                });
            }
            if let Some(pairs) = monomial_pairs(op) {
                for &(_, c, v) in &pairs {
                    damp[c as usize] += rate * v.norm_sqr();
                }
                channels.push(Channel::Gather { rate: *rate, pairs });
            } else {
                let o = op.entries.clone();
                let o_dag = op.dagger().entries;
                let q = o_dag.dot(&o);
                channels.push(Channel::Dense { rate: *rate, o, o_dag, q });
            }
        }
        Ok(Self { damp, channels })
    }

    /// Writes `out = -i [H, y] + sum_c rate_c D[o_c] y`.
    fn rhs<S: HamiltonianSource + ?Sized>(&self, h: &S, t: f64, y: &[C64], out: &mut [C64]) {
        let d = self.damp.len();
        h.commutator(t, y, out);
        let minus_i = C64::new(0.0, -1.0);
        for i in 0..d {
            let di = self.damp[i];
            let row = i * d;
            for j in 0..d {
                let idx = row + j;
                out[idx] = minus_i * out[idx] - y[idx] * (0.5 * (di + self.damp[j]));
            }
        }
        for channel in &self.channels {
            match channel {
                Channel::Gather { rate, pairs } => {
                    for &(ri, ci, vi) in pairs {
                        let weight = vi * *rate;
                        let out_row = ri as usize * d;
                        let y_row = ci as usize * d;
                        for &(rj, cj, vj) in pairs {
                            out[out_row + rj as usize] +=
                                weight * vj.conj() * y[y_row + cj as usize];
                        }
                    }
                }
                Channel::Dense { rate, o, o_dag, q } => {
                    let yv = ArrayView2::from_shape((d, d), y).expect("rho slice");
                    let sandwich = o.dot(&yv).dot(o_dag);
                    let anti = q.dot(&yv) + yv.dot(q);
                    for (slot, (s, a)) in out.iter_mut().zip(sandwich.iter().zip(anti.iter())) {
                        *slot += (s - a * 0.5) * *rate;
                    }
                }
            }
        }
    }
}

/// Entry list of an operator with at most one non-zero per row and column.
fn monomial_pairs(op: &Operator) -> Option<Vec<(u32, u32, C64)>> {
    let d = op.dim();
    let mut row_used = vec![false; d];
    let mut col_used = vec![false; d];
    let mut pairs = Vec::new();
    for ((i, j), z) in op.entries.indexed_iter() {
        if z.norm_sqr() == 0.0 {
            continue;
        }
        if row_used[i] || col_used[j] {
            return None;
        }
        row_used[i] = true;
        col_used[j] = true;
        pairs.push((i as u32, j as u32, *z));
    }
    Some(pairs)
}
