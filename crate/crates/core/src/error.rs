//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("degenerate mode: Fock cutoff must be at least one")]
    DegenerateMode,

    #[error("cutoff too small for amplitude: truncated tail weight {tail:.3e} exceeds 1e-8")]
    CutoffTooSmall { tail: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("resonant, dispersive theory invalid: |{denominator}| = {value:.3e} below 1e-6")]
    ResonantDenominator { denominator: String, value: f64 },

    #[error("step size too large: norm drifted by {drift:.3e} at t = {t:.3}")]
    NormDrift { drift: f64, t: f64 },

    #[error("step size too large: trace drifted by {drift:.3e} at t = {t:.3}")]
    TraceDrift { drift: f64, t: f64 },

    #[error("step size too large: hermiticity deviation {deviation:.3e} at t = {t:.3}")]
    HermiticityDrift { deviation: f64, t: f64 },

    #[error("measurement never succeeds: outcome probability {probability:.3e} below 1e-12")]
    MeasurementNeverSucceeds { probability: f64 },

    #[error("target labels exceed truncation: need ({n},{m}) within ({n_max_a},{n_max_b})")]
    TargetOutsideTruncation {
        n: usize,
        m: usize,
        n_max_a: usize,
        n_max_b: usize,
    },

    #[error("invalid target: tone labels must differ in both modes")]
    DegenerateTarget,

    #[error("{0}")]
    InvalidInput(String),
}
