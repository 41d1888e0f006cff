//! Truncated Hilbert-space plumbing: Fock-space ladder operators, coherent
//! states, qutrit-times-two-mode embeddings, and the state/density types the
//! integrators work on.
//!
//! The composite space is ordered qutrit-major: flat index
//! `((level * (n_max_a + 1)) + n) * (n_max_b + 1) + m` with qutrit levels
//! g = 0, e = 1, f = 2.

use ndarray::{Array1, Array2};

use crate::error::CoreError;
use crate::linalg;
use crate::{Result, C64};

/// Weight below which a coherent state's truncated tail is acceptable.
pub const COHERENT_TAIL_TOL: f64 = 1e-8;

/// The three levels of the artificial atom, in ascending bare energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QutritLevel {
    G,
    E,
    F,
}

impl QutritLevel {
    pub const ALL: [QutritLevel; 3] = [QutritLevel::G, QutritLevel::E, QutritLevel::F];

    pub fn index(self) -> usize {
        match self {
            QutritLevel::G => 0,
            QutritLevel::E => 1,
            QutritLevel::F => 2,
        }
    }

    pub fn from_index(i: usize) -> Self {
        match i {
            0 => QutritLevel::G,
            1 => QutritLevel::E,
            2 => QutritLevel::F,
            _ => panic!("qutrit level index {i} out of range"),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            QutritLevel::G => "g",
            QutritLevel::E => "e",
            QutritLevel::F => "f",
        }
    }
}

/// Fock cutoffs of the two resonator modes. A cutoff `n_max` keeps the
/// number states `0..=n_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeTruncation {
    pub n_max_a: usize,
    pub n_max_b: usize,
}

impl ModeTruncation {
    pub fn new(n_max_a: usize, n_max_b: usize) -> Self {
        Self { n_max_a, n_max_b }
    }

    pub fn dim_a(&self) -> usize {
        self.n_max_a + 1
    }

    pub fn dim_b(&self) -> usize {
        self.n_max_b + 1
    }

    /// Dimension of the two-mode resonator subspace.
    pub fn dim_modes(&self) -> usize {
        self.dim_a() * self.dim_b()
    }

    /// Dimension of the full qutrit + two-mode space.
    pub fn dim_total(&self) -> usize {
        3 * self.dim_modes()
    }

    /// Flat index of `|level, n, m>`.
    pub fn flat(&self, level: QutritLevel, n: usize, m: usize) -> usize {
        debug_assert!(n <= self.n_max_a && m <= self.n_max_b);
        (level.index() * self.dim_a() + n) * self.dim_b() + m
    }

    /// Flat index of `|n, m>` within the resonator-only subspace.
    pub fn flat_modes(&self, n: usize, m: usize) -> usize {
        debug_assert!(n <= self.n_max_a && m <= self.n_max_b);
        n * self.dim_b() + m
    }

    /// Inverse of [`flat`](Self::flat).
    pub fn unflat(&self, idx: usize) -> (QutritLevel, usize, usize) {
        let m = idx % self.dim_b();
        let rest = idx / self.dim_b();
        let n = rest % self.dim_a();
        let level = QutritLevel::from_index(rest / self.dim_a());
        (level, n, m)
    }

    pub fn contains(&self, n: usize, m: usize) -> bool {
        n <= self.n_max_a && m <= self.n_max_b
    }
}

/// Dense complex matrix acting on one of the truncated spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    pub entries: Array2<C64>,
}

impl Operator {
    pub fn new(entries: Array2<C64>) -> Self {
        assert_eq!(entries.nrows(), entries.ncols(), "operators are square");
        Self { entries }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(Array2::zeros((dim, dim)))
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(Array2::eye(dim))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut entries = Array2::zeros((diag.len(), diag.len()));
        for (i, &x) in diag.iter().enumerate() {
            entries[(i, i)] = C64::new(x, 0.0);
        }
        Self::new(entries)
    }

    /// `|row><col|` on a `dim`-dimensional space.
    pub fn transition(dim: usize, row: usize, col: usize) -> Self {
        let mut entries = Array2::zeros((dim, dim));
        entries[(row, col)] = C64::new(1.0, 0.0);
        Self::new(entries)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn dagger(&self) -> Self {
        Self::new(self.entries.t().mapv(|z| z.conj()))
    }

    pub fn dot(&self, other: &Operator) -> Operator {
        Self::new(self.entries.dot(&other.entries))
    }

    pub fn scaled(&self, factor: C64) -> Operator {
        Self::new(self.entries.mapv(|z| z * factor))
    }

    pub fn add(&self, other: &Operator) -> Operator {
        Self::new(&self.entries + &other.entries)
    }

    /// Largest absolute entry of `O - O^dagger`.
    pub fn hermiticity_deviation(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0_f64;
        for i in 0..d {
            for j in i..d {
                let dev = (self.entries[(i, j)] - self.entries[(j, i)].conj()).norm();
                worst = worst.max(dev);
            }
        }
        worst
    }

    pub fn apply(&self, state: &StateVector) -> StateVector {
        StateVector::new(self.entries.dot(&state.amplitudes))
    }
}

/// Normalised (or about-to-be-normalised) pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub amplitudes: Array1<C64>,
}

impl StateVector {
    pub fn new(amplitudes: Array1<C64>) -> Self {
        Self { amplitudes }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(Array1::zeros(dim))
    }

    /// Basis state `|idx>`.
    pub fn basis(dim: usize, idx: usize) -> Self {
        let mut s = Self::zeros(dim);
        s.amplitudes[idx] = C64::new(1.0, 0.0);
        s
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> StateVector {
        let n = self.norm();
        assert!(n > 0.0, "cannot normalise the zero vector");
        StateVector::new(self.amplitudes.mapv(|z| z / C64::new(n, 0.0)))
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `|psi><psi|`.
    pub fn outer(&self) -> DensityMatrix {
        let d = self.dim();
        let mut rho = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                rho[(i, j)] = self.amplitudes[i] * self.amplitudes[j].conj();
            }
        }
        DensityMatrix::new(rho)
    }

    /// Kronecker product, left factor major.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let mut out = Array1::zeros(self.dim() * other.dim());
        for (i, &a) in self.amplitudes.iter().enumerate() {
            for (j, &b) in other.amplitudes.iter().enumerate() {
                out[i * other.dim() + j] = a * b;
            }
        }
        StateVector::new(out)
    }
}

/// Dense density matrix; trace one and Hermitian up to integrator drift.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub entries: Array2<C64>,
}

impl DensityMatrix {
    pub fn new(entries: Array2<C64>) -> Self {
        assert_eq!(entries.nrows(), entries.ncols(), "density matrices are square");
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.entries[(i, i)].re).sum()
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        Operator {
            entries: self.entries.clone(),
        }
        .hermiticity_deviation()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_hermitian_eigenvalue(&self.entries)
    }

    /// `<psi| rho |psi>`.
    pub fn expectation(&self, state: &StateVector) -> f64 {
        let h_psi = self.entries.dot(&state.amplitudes);
        state
            .amplitudes
            .iter()
            .zip(h_psi.iter())
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }
}

/// `n!` as a float; label occupations stay far below the 170! overflow bound.
pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Annihilation operator on a single truncated mode.
///
/// The cutoff must be positive; a single-level mode has no ladder structure.
pub fn ladder_operator(cutoff: usize) -> Result<Operator> {
    if cutoff == 0 {
        return Err(CoreError::DegenerateMode);
    }
    let dim = cutoff + 1;
    let mut entries = Array2::zeros((dim, dim));
    for n in 1..dim {
        entries[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Ok(Operator::new(entries))
}

/// Poisson weight the truncation discards for amplitude `alpha`.
pub fn coherent_tail_weight(alpha: C64, cutoff: usize) -> f64 {
    let nbar = alpha.norm_sqr();
    let mut term = (-nbar).exp();
    let mut kept = term;
    for n in 1..=cutoff {
        term *= nbar / n as f64;
        kept += term;
    }
    (1.0 - kept).max(0.0)
}

/// Truncated coherent state `|alpha>`, renormalised on the kept levels.
///
/// Fails when the discarded tail weight exceeds [`COHERENT_TAIL_TOL`].
pub fn coherent_state(alpha: C64, cutoff: usize) -> Result<StateVector> {
    let tail = coherent_tail_weight(alpha, cutoff);
    if tail > COHERENT_TAIL_TOL {
        return Err(CoreError::CutoffTooSmall { tail });
    }
    let dim = cutoff + 1;
    let mut amps = Array1::zeros(dim);
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    amps[0] = c;
    for n in 1..dim {
        c = c * alpha / C64::new((n as f64).sqrt(), 0.0);
        amps[n] = c;
    }
    Ok(StateVector::new(amps).normalized())
}

/// Truncated displacement operator `exp(alpha a^dag - alpha* a)`.
///
/// Subject to the same tail check as [`coherent_state`]: a displacement the
/// cutoff cannot hold is rejected rather than silently distorted.
pub fn displacement_operator(alpha: C64, cutoff: usize) -> Result<Operator> {
    let tail = coherent_tail_weight(alpha, cutoff);
    if tail > COHERENT_TAIL_TOL {
        return Err(CoreError::CutoffTooSmall { tail });
    }
    let a = ladder_operator(cutoff)?;
    let generator = a.dagger().scaled(alpha).entries - a.scaled(alpha.conj()).entries;
    Ok(Operator::new(linalg::expm(&generator)))
}

/// Kronecker embedding `q (x) a (x) b` onto the composite space.
pub fn embed(qutrit: &Operator, mode_a: &Operator, mode_b: &Operator) -> Result<Operator> {
    if qutrit.dim() != 3 {
        return Err(CoreError::DimensionMismatch {
            expected: 3,
            got: qutrit.dim(),
        });
    }
    let qa = linalg::kron(&qutrit.entries, &mode_a.entries);
    Ok(Operator::new(linalg::kron(&qa, &mode_b.entries)))
}

/// Reduced density matrix of the two resonator modes after tracing out the
/// qutrit.
pub fn partial_trace_qutrit(rho: &DensityMatrix, trunc: &ModeTruncation) -> Result<DensityMatrix> {
    let dm = trunc.dim_modes();
    if rho.dim() != 3 * dm {
        return Err(CoreError::DimensionMismatch {
            expected: 3 * dm,
            got: rho.dim(),
        });
    }
    let mut out = Array2::zeros((dm, dm));
    for l in 0..3 {
        let base = l * dm;
        for i in 0..dm {
            for j in 0..dm {
                out[(i, j)] += rho.entries[(base + i, base + j)];
            }
        }
    }
    Ok(DensityMatrix::new(out))
}
