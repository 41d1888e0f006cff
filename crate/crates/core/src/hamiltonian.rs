//! Hamiltonians of the three coupling topologies (lambda, delta, ladder),
//! their dispersive shifts and dressed energies, and the rotating-frame
//! two-tone drive the protocol integrates.

use std::f64::consts::PI;

use ndarray::Array2;

use crate::dynamics::HamiltonianSource;
use crate::error::CoreError;
use crate::hilbert::{
    coherent_tail_weight, embed, factorial, ladder_operator, ModeTruncation, Operator,
    QutritLevel, COHERENT_TAIL_TOL,
};
use crate::{Result, C64};

/// Denominator magnitude below which the dispersive expansion is rejected.
pub const RESONANCE_TOL: f64 = 1e-6;

/// Coupling topology between the three-level system and the two modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QutritType {
    /// Mode a on the f-e leg, mode b on the f-g leg.
    Lambda,
    /// Both modes on all three legs (cyclic transitions, isotropic coupling).
    Delta,
    /// Mode a on the e-g leg, mode b on the f-e leg.
    Xi,
}

impl QutritType {
    /// Qutrit legs the two drive tones address, as (source, sink) pairs.
    /// Both tones share the sink, which is the level measured afterwards.
    pub fn tone_levels(self) -> [(QutritLevel, QutritLevel); 2] {
        match self {
            QutritType::Lambda | QutritType::Delta => [
                (QutritLevel::E, QutritLevel::F),
                (QutritLevel::G, QutritLevel::F),
            ],
            QutritType::Xi => [
                (QutritLevel::G, QutritLevel::E),
                (QutritLevel::F, QutritLevel::E),
            ],
        }
    }

    pub fn sink_level(self) -> QutritLevel {
        self.tone_levels()[0].1
    }

    pub fn label(self) -> &'static str {
        match self {
            QutritType::Lambda => "lambda",
            QutritType::Delta => "delta",
            QutritType::Xi => "xi",
        }
    }
}

/// Physical parameters in units of the transverse coupling scale.
/// All transition frequencies are positive and far detuned from the modes.
#[derive(Debug, Clone)]
pub struct SystemParams {
    pub qutrit: QutritType,
    pub omega_a: f64,
    pub omega_b: f64,
    pub omega_e: f64,
    pub omega_f: f64,
    pub g_a: f64,
    pub g_b: f64,
    /// Dispersive mode-mode crosstalk strength; zero in the ideal device.
    pub g_ab: f64,
    pub truncation: ModeTruncation,
}

impl SystemParams {
    /// Bare energy of a qutrit level (ground state pinned to zero).
    pub fn level_energy(&self, level: QutritLevel) -> f64 {
        match level {
            QutritLevel::G => 0.0,
            QutritLevel::E => self.omega_e,
            QutritLevel::F => self.omega_f,
        }
    }

    /// Named detuning denominators entering the dispersive shifts, with the
    /// coupling that divides by each.
    fn shift_denominators(&self) -> Vec<(String, f64, f64)> {
        let (wa, wb, we, wf) = (self.omega_a, self.omega_b, self.omega_e, self.omega_f);
        match self.qutrit {
            QutritType::Lambda => vec![
                ("omega_f - omega_e - omega_a".into(), self.g_a, wf - we - wa),
                ("omega_f - omega_e + omega_a".into(), self.g_a, wf - we + wa),
                ("omega_f - omega_b".into(), self.g_b, wf - wb),
                ("omega_f + omega_b".into(), self.g_b, wf + wb),
            ],
            QutritType::Xi => vec![
                ("omega_e - omega_a".into(), self.g_a, we - wa),
                ("omega_e + omega_a".into(), self.g_a, we + wa),
                ("omega_f - omega_e - omega_b".into(), self.g_b, wf - we - wb),
                ("omega_f - omega_e + omega_b".into(), self.g_b, wf - we + wb),
            ],
            QutritType::Delta => {
                let levels = [(QutritLevel::G, 0.0), (QutritLevel::E, we), (QutritLevel::F, wf)];
                let modes = [("a", self.g_a, wa), ("b", self.g_b, wb)];
                let mut out = Vec::with_capacity(12);
                for (k, wk) in levels {
                    for (j, wj) in levels {
                        if k.index() == j.index() {
                            continue;
                        }
                        for (ml, g, wm) in modes {
                            let name = format!(
                                "omega_{} - omega_{} - omega_{ml}",
                                k.label(),
                                j.label()
                            );
                            out.push((name, g, wk - wj - wm));
                        }
                    }
                }
                out
            }
        }
    }

    /// Human-readable warnings when a coupling-to-detuning ratio is large
    /// enough (above 0.1) to strain the second-order dispersive treatment.
    pub fn dispersive_warnings(&self) -> Vec<String> {
        self.shift_denominators()
            .into_iter()
            .filter(|(_, g, den)| *g != 0.0 && den.abs() < 10.0 * g.abs())
            .map(|(name, g, den)| {
                format!(
                    "dispersive ratio |g / ({name})| = {:.3} exceeds 0.1",
                    (g / den).abs()
                )
            })
            .collect()
    }
}

/// Second-order level repulsions. The four named shifts describe the legs a
/// given topology actually couples; the delta topology additionally carries
/// the full per-leg table.
#[derive(Debug, Clone)]
pub struct DispersiveShifts {
    pub chi_a: f64,
    pub chi_a_prime: f64,
    pub chi_b: f64,
    pub chi_b_prime: f64,
    pub table: Option<DeltaShiftTable>,
}

/// Per-leg shifts of the delta topology:
/// `chi[mode][k][j] = g_mode^2 / (theta(k,j) (omega_k - omega_j - omega_mode))`
/// with `theta(k,j) = sign(omega_k - omega_j)`, mode index 0 = a, 1 = b.
#[derive(Debug, Clone)]
pub struct DeltaShiftTable {
    pub chi: [[[f64; 3]; 3]; 2],
    theta: [[f64; 3]; 3],
}

impl DeltaShiftTable {
    pub fn theta(&self, k: QutritLevel, j: QutritLevel) -> f64 {
        self.theta[k.index()][j.index()]
    }

    pub fn chi(&self, mode: usize, k: QutritLevel, j: QutritLevel) -> f64 {
        self.chi[mode][k.index()][j.index()]
    }
}

fn checked_shift(g: f64, den: f64, name: impl FnOnce() -> String) -> Result<f64> {
    if den.abs() < RESONANCE_TOL {
        return Err(CoreError::ResonantDenominator {
            denominator: name(),
            value: den.abs(),
        });
    }
    Ok(g * g / den)
}

/// Second-order dispersive shifts of the given topology.
///
/// Fails when any detuning denominator is within [`RESONANCE_TOL`] of zero,
/// where the perturbative elimination breaks down.
pub fn dispersive_shifts(p: &SystemParams) -> Result<DispersiveShifts> {
    let (wa, wb, we, wf) = (p.omega_a, p.omega_b, p.omega_e, p.omega_f);
    match p.qutrit {
        QutritType::Lambda => Ok(DispersiveShifts {
            chi_a: checked_shift(p.g_a, wf - we - wa, || "omega_f - omega_e - omega_a".into())?,
            chi_a_prime: checked_shift(p.g_a, wf - we + wa, || {
                "omega_f - omega_e + omega_a".into()
            })?,
            chi_b: checked_shift(p.g_b, wf - wb, || "omega_f - omega_b".into())?,
            chi_b_prime: checked_shift(p.g_b, wf + wb, || "omega_f + omega_b".into())?,
            table: None,
        }),
        QutritType::Xi => Ok(DispersiveShifts {
            chi_a: checked_shift(p.g_a, we - wa, || "omega_e - omega_a".into())?,
            chi_a_prime: checked_shift(p.g_a, we + wa, || "omega_e + omega_a".into())?,
            chi_b: checked_shift(p.g_b, wf - we - wb, || "omega_f - omega_e - omega_b".into())?,
            chi_b_prime: checked_shift(p.g_b, wf - we + wb, || {
                "omega_f - omega_e + omega_b".into()
            })?,
            table: None,
        }),
        QutritType::Delta => {
            let w = [0.0, we, wf];
            let gm = [p.g_a, p.g_b];
            let wm = [wa, wb];
            let mut chi = [[[0.0; 3]; 3]; 2];
            let mut theta = [[0.0; 3]; 3];
            for k in 0..3 {
                for j in 0..3 {
                    if k == j {
                        continue;
                    }
                    theta[k][j] = if w[k] > w[j] { 1.0 } else { -1.0 };
                    for mode in 0..2 {
                        let den = theta[k][j] * (w[k] - w[j] - wm[mode]);
                        let lvl = ["g", "e", "f"];
                        chi[mode][k][j] = checked_shift(gm[mode], den, || {
                            format!(
                                "omega_{} - omega_{} - omega_{}",
                                lvl[k],
                                lvl[j],
                                ["a", "b"][mode]
                            )
                        })?;
                    }
                }
            }
            let table = DeltaShiftTable { chi, theta };
            Ok(DispersiveShifts {
                // Leg correspondence with the lambda topology: the f-e leg
                // carries mode a, the f-g leg mode b.
                chi_a: table.chi(0, QutritLevel::F, QutritLevel::E),
                chi_a_prime: table.chi(0, QutritLevel::E, QutritLevel::F),
                chi_b: table.chi(1, QutritLevel::F, QutritLevel::G),
                chi_b_prime: table.chi(1, QutritLevel::G, QutritLevel::F),
                table: Some(table),
            })
        }
    }
}

/// Dressed diagonal energy `E_level(n, m)` of the effective Hamiltonian.
pub fn effective_energy(
    p: &SystemParams,
    shifts: &DispersiveShifts,
    level: QutritLevel,
    n: usize,
    m: usize,
) -> f64 {
    let (nf, mf) = (n as f64, m as f64);
    let base = nf * p.omega_a + mf * p.omega_b;
    let s = shifts;
    match p.qutrit {
        QutritType::Lambda => match level {
            QutritLevel::G => base - s.chi_b_prime - mf * (s.chi_b + s.chi_b_prime),
            QutritLevel::E => base + p.omega_e - s.chi_a_prime - nf * (s.chi_a + s.chi_a_prime),
            QutritLevel::F => {
                base + p.omega_f
                    + s.chi_a
                    + s.chi_b
                    + nf * (s.chi_a + s.chi_a_prime)
                    + mf * (s.chi_b + s.chi_b_prime)
            }
        },
        QutritType::Xi => match level {
            QutritLevel::G => base - s.chi_a_prime - nf * (s.chi_a + s.chi_a_prime),
            QutritLevel::E => {
                base + p.omega_e + s.chi_a - s.chi_b_prime + nf * (s.chi_a + s.chi_a_prime)
                    - mf * (s.chi_b + s.chi_b_prime)
            }
            QutritLevel::F => base + p.omega_f + s.chi_b + mf * (s.chi_b + s.chi_b_prime),
        },
        QutritType::Delta => {
            let table = s.table.as_ref().expect("delta shifts carry the full table");
            let occ = [nf, mf];
            let mut energy = p.level_energy(level) + base;
            for j in QutritLevel::ALL {
                if j.index() == level.index() {
                    continue;
                }
                let th = table.theta(level, j);
                for mode in 0..2 {
                    energy += th * table.chi(mode, level, j);
                    energy += occ[mode] * th * (table.chi(mode, level, j) + table.chi(mode, j, level));
                }
            }
            energy
        }
    }
}

/// Diagonal effective Hamiltonian on the full composite space.
pub fn effective_hamiltonian(p: &SystemParams) -> Result<Operator> {
    let shifts = dispersive_shifts(p)?;
    let t = p.truncation;
    let mut diag = vec![0.0; t.dim_total()];
    for (idx, slot) in diag.iter_mut().enumerate() {
        let (level, n, m) = t.unflat(idx);
        *slot = effective_energy(p, &shifts, level, n, m);
    }
    Ok(Operator::from_real_diagonal(&diag))
}

/// Full lab-frame Hamiltonian: bare energies plus the transverse couplings
/// of the topology, with counter-rotating terms retained, plus mode-mode
/// crosstalk when present.
pub fn lab_hamiltonian(p: &SystemParams) -> Result<Operator> {
    let t = p.truncation;
    let a = ladder_operator(t.n_max_a)?;
    let b = ladder_operator(t.n_max_b)?;
    let ia = Operator::identity(t.dim_a());
    let ib = Operator::identity(t.dim_b());
    let iq = Operator::identity(3);
    let xa = a.add(&a.dagger());
    let xb = b.add(&b.dagger());
    let num_a = a.dagger().dot(&a);
    let num_b = b.dagger().dot(&b);

    let proj = |l: QutritLevel| Operator::transition(3, l.index(), l.index());
    let flip = |x: QutritLevel, y: QutritLevel| {
        let f = Operator::transition(3, x.index(), y.index());
        f.add(&f.dagger())
    };
    let real = |x: f64| C64::new(x, 0.0);

    let mut h = embed(&iq, &num_a.scaled(real(p.omega_a)), &ib)?;
    h = h.add(&embed(&iq, &ia, &num_b.scaled(real(p.omega_b)))?);
    h = h.add(&embed(&proj(QutritLevel::E).scaled(real(p.omega_e)), &ia, &ib)?);
    h = h.add(&embed(&proj(QutritLevel::F).scaled(real(p.omega_f)), &ia, &ib)?);

    match p.qutrit {
        QutritType::Lambda => {
            h = h.add(&embed(&flip(QutritLevel::F, QutritLevel::E).scaled(real(p.g_a)), &xa, &ib)?);
            h = h.add(&embed(&flip(QutritLevel::F, QutritLevel::G).scaled(real(p.g_b)), &ia, &xb)?);
        }
        QutritType::Delta => {
            let all_flips = flip(QutritLevel::E, QutritLevel::G)
                .add(&flip(QutritLevel::F, QutritLevel::G))
                .add(&flip(QutritLevel::F, QutritLevel::E));
            h = h.add(&embed(&all_flips.scaled(real(p.g_a)), &xa, &ib)?);
            h = h.add(&embed(&all_flips.scaled(real(p.g_b)), &ia, &xb)?);
        }
        QutritType::Xi => {
            h = h.add(&embed(&flip(QutritLevel::E, QutritLevel::G).scaled(real(p.g_a)), &xa, &ib)?);
            h = h.add(&embed(&flip(QutritLevel::F, QutritLevel::E).scaled(real(p.g_b)), &ia, &xb)?);
        }
    }
    if p.g_ab != 0.0 {
        h = h.add(&embed(&iq, &xa.scaled(real(p.g_ab)), &xb)?);
    }
    Ok(h)
}

/// Two Fock labels and the coherent seed amplitudes that together define the
/// post-selected target `cos(varphi) |n1 m1> + sin(varphi) |n2 m2>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetSpec {
    pub n_1: usize,
    pub m_1: usize,
    pub n_2: usize,
    pub m_2: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl TargetSpec {
    pub fn new(n_1: usize, m_1: usize, n_2: usize, m_2: usize, alpha: f64, beta: f64) -> Self {
        Self { n_1, m_1, n_2, m_2, alpha, beta }
    }

    /// `(|N 0> + |0 N>)/sqrt(2)` from unit coherent seeds.
    pub fn noon(n: usize) -> Self {
        Self::new(n, 0, 0, n, 1.0, 1.0)
    }

    /// `(|0 0> + |1 1>)/sqrt(2)` from unit coherent seeds.
    pub fn bell() -> Self {
        Self::new(0, 0, 1, 1, 1.0, 1.0)
    }

    /// Unnormalised coherent amplitudes of the two labels.
    pub fn weights(&self) -> (f64, f64) {
        let w = |n: usize, m: usize| {
            self.alpha.powi(n as i32) * self.beta.powi(m as i32)
                / (factorial(n) * factorial(m)).sqrt()
        };
        (w(self.n_1, self.m_1), w(self.n_2, self.m_2))
    }

    /// Mixing angle of the target: `tan(varphi) = w2 / w1`.
    pub fn varphi(&self) -> f64 {
        let (w1, w2) = self.weights();
        w2.atan2(w1)
    }

    pub fn validate(&self, trunc: &ModeTruncation) -> Result<()> {
        if self.alpha <= 0.0 || self.beta <= 0.0 {
            return Err(CoreError::InvalidInput(
                "coherent seed amplitudes must be positive".into(),
            ));
        }
        if self.n_1 == self.n_2 && self.m_1 == self.m_2 {
            return Err(CoreError::DegenerateTarget);
        }
        for (n, m) in [(self.n_1, self.m_1), (self.n_2, self.m_2)] {
            if !trunc.contains(n, m) {
                return Err(CoreError::TargetOutsideTruncation {
                    n,
                    m,
                    n_max_a: trunc.n_max_a,
                    n_max_b: trunc.n_max_b,
                });
            }
        }
        Ok(())
    }

    /// Default truncation: eight levels of headroom above the larger label
    /// in each mode, extended until the coherent seed's discarded tail is
    /// inside tolerance.
    pub fn default_truncation(&self) -> ModeTruncation {
        let fit = |label_max: usize, amp: f64| {
            let mut cutoff = label_max + 8;
            while coherent_tail_weight(C64::new(amp, 0.0), cutoff) > COHERENT_TAIL_TOL {
                cutoff += 1;
            }
            cutoff
        };
        ModeTruncation::new(
            fit(self.n_1.max(self.n_2), self.alpha),
            fit(self.m_1.max(self.m_2), self.beta),
        )
    }
}

/// Dressed transition frequencies the two tones should be set to, for the
/// lambda and delta topologies (tones address the e-f and g-f legs).
pub fn drive_frequencies(
    p: &SystemParams,
    shifts: &DispersiveShifts,
    target: &TargetSpec,
) -> Result<(f64, f64)> {
    if p.qutrit == QutritType::Xi {
        return Err(CoreError::InvalidInput(
            "ladder topology drives the g-e and f-e legs: use xi_drive_frequencies".into(),
        ));
    }
    Ok(planned_frequencies(p, shifts, target))
}

/// Dressed transition frequencies for the ladder topology (tones address
/// the g-e and f-e legs).
pub fn xi_drive_frequencies(
    p: &SystemParams,
    shifts: &DispersiveShifts,
    target: &TargetSpec,
) -> Result<(f64, f64)> {
    if p.qutrit != QutritType::Xi {
        return Err(CoreError::InvalidInput(
            "only the ladder topology uses xi_drive_frequencies".into(),
        ));
    }
    Ok(planned_frequencies(p, shifts, target))
}

/// Planned tone frequencies are the magnitudes of the dressed gaps: in the
/// ladder topology the second tone drives downward in energy (f to e), so
/// the signed gap is negative while the physical tone frequency stays
/// positive. The sign is recovered from the gap wherever phases are formed.
fn planned_frequencies(p: &SystemParams, shifts: &DispersiveShifts, target: &TargetSpec) -> (f64, f64) {
    let [(src1, sink1), (src2, sink2)] = p.qutrit.tone_levels();
    let gap = |src, sink, n, m| {
        effective_energy(p, shifts, sink, n, m) - effective_energy(p, shifts, src, n, m)
    };
    (
        gap(src1, sink1, target.n_1, target.m_1).abs(),
        gap(src2, sink2, target.n_2, target.m_2).abs(),
    )
}

/// Detunings of the dressed (n, m) transitions from the two applied tones.
/// Tone frequencies are positive; each detuning is signed along its gap's
/// own direction, so the planned target labels come out exactly zero.
pub fn detunings(
    p: &SystemParams,
    shifts: &DispersiveShifts,
    n: usize,
    m: usize,
    omega_1: f64,
    omega_2: f64,
) -> (f64, f64) {
    let [(src1, sink1), (src2, sink2)] = p.qutrit.tone_levels();
    let gap = |src, sink| {
        effective_energy(p, shifts, sink, n, m) - effective_energy(p, shifts, src, n, m)
    };
    let against = |gap: f64, omega: f64| gap.signum() * (gap.abs() - omega);
    (
        against(gap(src1, sink1), omega_1),
        against(gap(src2, sink2), omega_2),
    )
}

/// Whether the two tones run together for one pulse window or one after the
/// other for two windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    #[default]
    Simultaneous,
    Sequential,
}

/// Two-tone drive plan: nominal Rabi amplitude, applied tone frequencies,
/// and the two systematic error knobs.
#[derive(Debug, Clone)]
pub struct DriveSpec {
    /// Nominal Rabi amplitude of each tone.
    pub omega: f64,
    pub omega_1: f64,
    pub omega_2: f64,
    /// Intensity imbalance: tone 1 runs at omega(1-eps), tone 2 at omega(1+eps).
    pub epsilon: f64,
    /// Frequency miscalibration: both tones run at omega_j(1+eps').
    pub epsilon_prime: f64,
    pub schedule: Schedule,
}

impl DriveSpec {
    /// Error-free plan with tones on the dressed target transitions.
    pub fn planned(p: &SystemParams, target: &TargetSpec, omega: f64) -> Result<DriveSpec> {
        let shifts = dispersive_shifts(p)?;
        let (omega_1, omega_2) = planned_frequencies(p, &shifts, target);
        Ok(DriveSpec {
            omega,
            omega_1,
            omega_2,
            epsilon: 0.0,
            epsilon_prime: 0.0,
            schedule: Schedule::Simultaneous,
        })
    }

    /// Duration of one pulse window, the quarter Rabi period.
    pub fn pulse_duration(&self) -> f64 {
        PI / (2.0 * self.omega)
    }

    pub fn total_duration(&self) -> f64 {
        match self.schedule {
            Schedule::Simultaneous => self.pulse_duration(),
            Schedule::Sequential => 2.0 * self.pulse_duration(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Coupling {
    row: usize,
    col: usize,
    amp: C64,
    freq: f64,
    /// 1 or 2 for the drive tones, 0 for always-on crosstalk.
    tone: u8,
}

/// Rotating-frame Hamiltonian of the driven system: every matrix element is
/// a constant amplitude times `exp(i freq t)`, stored as an upper-triangle
/// coupling list (Hermitian conjugates are implicit).
#[derive(Debug, Clone)]
pub struct RotatingDriveHamiltonian {
    dim: usize,
    couplings: Vec<Coupling>,
    schedule: Schedule,
    window: f64,
    max_freq: f64,
}

impl RotatingDriveHamiltonian {
    pub fn new(p: &SystemParams, drive: &DriveSpec, target: &TargetSpec) -> Result<Self> {
        Self::build(p, drive, target, false)
    }

    /// Variant that keeps only the two resonant couplings and drops
    /// crosstalk: the secular approximation the closed forms describe.
    pub fn resonant_only(p: &SystemParams, drive: &DriveSpec, target: &TargetSpec) -> Result<Self> {
        Self::build(p, drive, target, true)
    }

    fn build(
        p: &SystemParams,
        drive: &DriveSpec,
        target: &TargetSpec,
        resonant_only: bool,
    ) -> Result<Self> {
        target.validate(&p.truncation)?;
        let shifts = dispersive_shifts(p)?;
        let trunc = p.truncation;
        let legs = p.qutrit.tone_levels();
        let amps = [
            drive.omega * (1.0 - drive.epsilon),
            drive.omega * (1.0 + drive.epsilon),
        ];
        let applied = [
            drive.omega_1 * (1.0 + drive.epsilon_prime),
            drive.omega_2 * (1.0 + drive.epsilon_prime),
        ];
        let labels = [(target.n_1, target.m_1), (target.n_2, target.m_2)];

        let mut couplings = Vec::new();
        for tone in 0..2 {
            let (src, sink) = legs[tone];
            let gap = |n: usize, m: usize| {
                effective_energy(p, &shifts, sink, n, m) - effective_energy(p, &shifts, src, n, m)
            };
            // Applied frequencies are positive magnitudes; a tone driving a
            // downward gap beats against it with the opposite sign.
            let direction = gap(labels[tone].0, labels[tone].1).signum();
            for n in 0..=trunc.n_max_a {
                for m in 0..=trunc.n_max_b {
                    if resonant_only && (n, m) != labels[tone] {
                        continue;
                    }
                    couplings.push(Coupling {
                        row: trunc.flat(sink, n, m),
                        col: trunc.flat(src, n, m),
                        amp: C64::new(amps[tone], 0.0),
                        freq: gap(n, m) - direction * applied[tone],
                        tone: tone as u8 + 1,
                    });
                }
            }
        }

        if p.g_ab != 0.0 && !resonant_only {
            for level in QutritLevel::ALL {
                let energy = |n, m| effective_energy(p, &shifts, level, n, m);
                for n in 0..trunc.n_max_a {
                    for m in 0..=trunc.n_max_b {
                        // a^dag b^dag leg: (n, m) -> (n+1, m+1).
                        if m + 1 <= trunc.n_max_b {
                            couplings.push(Coupling {
                                row: trunc.flat(level, n + 1, m + 1),
                                col: trunc.flat(level, n, m),
                                amp: C64::new(p.g_ab * (((n + 1) * (m + 1)) as f64).sqrt(), 0.0),
                                freq: energy(n + 1, m + 1) - energy(n, m),
                                tone: 0,
                            });
                        }
                        // a^dag b leg: (n, m) -> (n+1, m-1).
                        if m >= 1 {
                            couplings.push(Coupling {
                                row: trunc.flat(level, n + 1, m - 1),
                                col: trunc.flat(level, n, m),
                                amp: C64::new(p.g_ab * (((n + 1) * m) as f64).sqrt(), 0.0),
                                freq: energy(n + 1, m - 1) - energy(n, m),
                                tone: 0,
                            });
                        }
                    }
                }
            }
        }

        let max_freq = couplings.iter().map(|c| c.freq.abs()).fold(0.0, f64::max);
        Ok(Self {
            dim: trunc.dim_total(),
            couplings,
            schedule: drive.schedule,
            window: drive.pulse_duration(),
            max_freq,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coupling_count(&self) -> usize {
        self.couplings.len()
    }

    fn tone_active(&self, tone: u8, t: f64) -> bool {
        match (self.schedule, tone) {
            (_, 0) | (Schedule::Simultaneous, _) => true,
            (Schedule::Sequential, 1) => t < self.window,
            (Schedule::Sequential, _) => t >= self.window,
        }
    }

    /// Dense snapshot at time `t`; the integrators use the sparse paths.
    pub fn at(&self, t: f64) -> Operator {
        let mut entries = Array2::zeros((self.dim, self.dim));
        for c in &self.couplings {
            if !self.tone_active(c.tone, t) {
                continue;
            }
            let element = c.amp * C64::from_polar(1.0, c.freq * t);
            entries[(c.row, c.col)] += element;
            entries[(c.col, c.row)] += element.conj();
        }
        Operator::new(entries)
    }

    /// The two smooth pulses of a sequential schedule as stand-alone
    /// sources, so the integrator never steps across the tone switch. The
    /// second pulse carries the phase each coupling accumulated over the
    /// first window: running the pair back to back in local time is then
    /// exactly the piecewise drive.
    pub fn sequential_windows(&self) -> Option<(Self, Self)> {
        if self.schedule != Schedule::Sequential {
            return None;
        }
        let restrict = |tone: u8, offset: f64| {
            let couplings: Vec<Coupling> = self
                .couplings
                .iter()
                .filter(|c| c.tone == 0 || c.tone == tone)
                .map(|c| Coupling {
                    amp: c.amp * C64::from_polar(1.0, c.freq * offset),
                    ..*c
                })
                .collect();
            let max_freq = couplings.iter().map(|c| c.freq.abs()).fold(0.0, f64::max);
            Self {
                dim: self.dim,
                couplings,
                schedule: Schedule::Simultaneous,
                window: self.window,
                max_freq,
            }
        };
        Some((restrict(1, 0.0), restrict(2, self.window)))
    }
}

impl HamiltonianSource for RotatingDriveHamiltonian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        out.fill(C64::new(0.0, 0.0));
        for c in &self.couplings {
            if !self.tone_active(c.tone, t) {
                continue;
            }
            let element = c.amp * C64::from_polar(1.0, c.freq * t);
            out[c.row] += element * psi[c.col];
            out[c.col] += element.conj() * psi[c.row];
        }
    }

    fn commutator(&self, t: f64, rho: &[C64], out: &mut [C64]) {
        out.fill(C64::new(0.0, 0.0));
        let d = self.dim;
        for c in &self.couplings {
            if !self.tone_active(c.tone, t) {
                continue;
            }
            let element = c.amp * C64::from_polar(1.0, c.freq * t);
            let conj = element.conj();
            let (r, s) = (c.row, c.col);
            // H rho: row r picks up element * rho[s, :], row s the conjugate.
            for k in 0..d {
                out[r * d + k] += element * rho[s * d + k];
                out[s * d + k] += conj * rho[r * d + k];
            }
            // -rho H: column s picks up rho[:, r] * element, column r the conjugate.
            for k in 0..d {
                out[k * d + s] -= rho[k * d + r] * element;
                out[k * d + r] -= rho[k * d + s] * conj;
            }
        }
    }

    fn max_frequency(&self) -> f64 {
        self.max_freq
    }
}
