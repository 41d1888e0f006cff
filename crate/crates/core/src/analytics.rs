//! Closed-form planning tools: block-level Rabi formulas, the analytic
//! fidelity estimate, spectral collision scans, and small-parameter error
//! budgets for drive miscalibration and readout misalignment.

use std::f64::consts::PI;

use crate::error::CoreError;
use crate::hamiltonian::{dispersive_shifts, effective_energy, SystemParams, TargetSpec};
use crate::hilbert::factorial;
use crate::Result;

/// How spectator labels are weighted in the analytic fidelity estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightConvention {
    /// Photon-number probabilities of the coherent seeds.
    #[default]
    Poisson,
    /// Square-root factorial variant kept for comparison studies.
    PrintedSqrtFactorial,
}

/// Sink population of one detuned two-level block driven at amplitude
/// `omega` for time `t`.
pub fn driven_block_population(detuning: f64, omega: f64, t: f64) -> f64 {
    let rabi = (omega * omega + 0.25 * detuning * detuning).sqrt();
    let envelope = 4.0 * omega * omega / (4.0 * omega * omega + detuning * detuning);
    (rabi * t).sin().powi(2) * envelope
}

fn label_weight(target: &TargetSpec, convention: WeightConvention, n: usize, m: usize) -> f64 {
    let poisson = target.alpha.powi(2 * n as i32) * target.beta.powi(2 * m as i32);
    match convention {
        WeightConvention::Poisson => poisson / (factorial(n) * factorial(m)),
        WeightConvention::PrintedSqrtFactorial => poisson / (factorial(n) * factorial(m)).sqrt(),
    }
}

/// Analytic protocol fidelity from independent two-level blocks: every
/// spectator label contributes its transferred weight to the measured
/// branch, diluting the two target labels.
pub fn closed_form_fidelity(
    p: &SystemParams,
    target: &TargetSpec,
    omega: f64,
    convention: WeightConvention,
) -> Result<f64> {
    target.validate(&p.truncation)?;
    let shifts = dispersive_shifts(p)?;
    let pulse = PI / (2.0 * omega);
    let legs = p.qutrit.tone_levels();
    let labels = [(target.n_1, target.m_1), (target.n_2, target.m_2)];
    let gap = |tone: usize, n: usize, m: usize| {
        let (src, sink) = legs[tone];
        effective_energy(p, &shifts, sink, n, m) - effective_energy(p, &shifts, src, n, m)
    };
    let tone_freqs = [gap(0, target.n_1, target.m_1), gap(1, target.n_2, target.m_2)];

    let mut transferred = 0.0;
    for n in 0..=p.truncation.n_max_a {
        for m in 0..=p.truncation.n_max_b {
            let weight = label_weight(target, convention, n, m);
            for tone in 0..2 {
                let detuning = gap(tone, n, m) - tone_freqs[tone];
                transferred += weight * driven_block_population(detuning, omega, pulse);
            }
        }
    }
    let wanted = label_weight(target, convention, labels[0].0, labels[0].1)
        + label_weight(target, convention, labels[1].0, labels[1].1);
    Ok(wanted / transferred)
}

/// One spectator label whose transition sits close to an applied tone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionEntry {
    /// Which tone the label collides with (1 or 2).
    pub tone: u8,
    pub n: usize,
    pub m: usize,
    pub detuning: f64,
    /// Peak transfer the block would reach if driven indefinitely.
    pub peak_population: f64,
}

/// Integer direction `(n_k, m_k)` along which the detuning lattice of a
/// tone family nearly closes, making whole rays of labels collide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSolution {
    pub tone: u8,
    pub n_k: usize,
    pub m_k: usize,
    pub detuning: f64,
}

#[derive(Debug, Clone)]
pub struct CollisionReport {
    /// Spectator labels with |detuning| below `threshold * omega`, sorted
    /// by |detuning| ascending; the target labels themselves are excluded.
    pub entries: Vec<CollisionEntry>,
    /// Integer lattice directions with near-zero resulting detuning.
    pub lattice: Vec<LatticeSolution>,
    pub threshold: f64,
}

/// Scans both tone families over the truncation for spectator transitions
/// within `threshold * omega` of resonance (default threshold 5).
pub fn collision_scan(
    p: &SystemParams,
    target: &TargetSpec,
    omega: f64,
    threshold: f64,
) -> Result<CollisionReport> {
    target.validate(&p.truncation)?;
    let shifts = dispersive_shifts(p)?;
    let legs = p.qutrit.tone_levels();
    let labels = [(target.n_1, target.m_1), (target.n_2, target.m_2)];
    let gap = |tone: usize, n: usize, m: usize| {
        let (src, sink) = legs[tone];
        effective_energy(p, &shifts, sink, n, m) - effective_energy(p, &shifts, src, n, m)
    };
    let window = threshold * omega;

    let mut entries = Vec::new();
    for tone in 0..2usize {
        let tone_freq = gap(tone, labels[tone].0, labels[tone].1);
        for n in 0..=p.truncation.n_max_a {
            for m in 0..=p.truncation.n_max_b {
                if (n, m) == labels[tone] {
                    continue;
                }
                let detuning = gap(tone, n, m) - tone_freq;
                if detuning.abs() < window {
                    entries.push(CollisionEntry {
                        tone: tone as u8 + 1,
                        n,
                        m,
                        detuning,
                        peak_population: 4.0 * omega * omega
                            / (4.0 * omega * omega + detuning * detuning),
                    });
                }
            }
        }
    }
    entries.sort_by(|a, b| a.detuning.abs().total_cmp(&b.detuning.abs()));

    // The detuning of a label offset (dn, dm) from the tone's target is
    // linear: dn * slope_n + dm * slope_m. A near-cancelling integer pair
    // (n_k, -m_k) marks a whole colliding ray.
    let mut lattice = Vec::new();
    for tone in 0..2usize {
        let slope_n = gap(tone, 1, 0) - gap(tone, 0, 0);
        let slope_m = gap(tone, 0, 1) - gap(tone, 0, 0);
        for n_k in 1..=p.truncation.n_max_a {
            for m_k in 1..=p.truncation.n_max_b {
                let detuning = n_k as f64 * slope_n - m_k as f64 * slope_m;
                if detuning.abs() < window {
                    lattice.push(LatticeSolution {
                        tone: tone as u8 + 1,
                        n_k,
                        m_k,
                        detuning,
                    });
                }
            }
        }
    }
    lattice.sort_by(|a, b| a.detuning.abs().total_cmp(&b.detuning.abs()));

    Ok(CollisionReport {
        entries,
        lattice,
        threshold,
    })
}

/// Ratio of the two leading dispersive slopes,
/// `(omega_f - omega_b) / (omega_f - omega_e - omega_a)`: the knob that
/// moves collision rays on and off the integer lattice.
pub fn shift_ratio(p: &SystemParams) -> Result<f64> {
    let den = p.omega_f - p.omega_e - p.omega_a;
    if den.abs() < crate::hamiltonian::RESONANCE_TOL {
        return Err(CoreError::ResonantDenominator {
            denominator: "omega_f - omega_e - omega_a".into(),
            value: den.abs(),
        });
    }
    Ok((p.omega_f - p.omega_b) / den)
}

/// Fidelity penalty of a relative miscalibration `eps_prime` of both tone
/// frequencies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyErrorFidelity {
    /// Squared overlap of the detuned pulse output with the ideal one.
    pub exact: f64,
    /// The same overlap normalised by the detuned output's norm on the
    /// two-label subspace.
    pub renormalized: f64,
    /// Leading quadratic expansion of `exact`.
    pub second_order: f64,
}

/// Closed-form fidelity of the two resonant blocks when both tones are
/// applied at `omega_j (1 + eps_prime)` instead of `omega_j`.
pub fn frequency_error_fidelity(
    eps_prime: f64,
    omega: f64,
    omega_1: f64,
    omega_2: f64,
    varphi: f64,
) -> FrequencyErrorFidelity {
    let block = |tone_freq: f64| {
        let theta = (2.0 * omega).atan2(tone_freq * eps_prime);
        let pulse_angle = PI / (2.0 * theta.sin());
        pulse_angle.sin() * theta.sin()
    };
    let a1 = block(omega_1);
    let a2 = block(omega_2);
    let c2 = varphi.cos().powi(2);
    let s2 = varphi.sin().powi(2);
    let exact = (c2 * a1 + s2 * a2).powi(2);
    let renormalized = exact / (c2 * a1 * a1 + s2 * a2 * a2);
    let second_order = 1.0
        - (omega_1 * omega_1 * c2 + omega_2 * omega_2 * s2) / (4.0 * omega * omega)
            * eps_prime
            * eps_prime;
    FrequencyErrorFidelity {
        exact,
        renormalized,
        second_order,
    }
}

/// Small-angle estimate of the fidelity cost of a readout direction tilted
/// by `theta_1`, for a protocol with ideal success probability
/// `success_probability`.
pub fn nonideal_measurement_fidelity(theta_1: f64, success_probability: f64) -> f64 {
    1.0 - (1.0 / success_probability - 0.75) * theta_1 * theta_1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::QutritType;
    use crate::hilbert::ModeTruncation;

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

    #[test]
    fn resonant_block_transfers_completely_at_the_quarter_period() {
        let omega = 5e-3;
        let pulse = PI / (2.0 * omega);
        assert!((driven_block_population(0.0, omega, pulse) - 1.0).abs() < 1e-12);
        // Detuned blocks saturate below the envelope.
        let detuned = driven_block_population(0.05, omega, pulse);
        let envelope = 4.0 * omega * omega / (4.0 * omega * omega + 0.05 * 0.05);
        assert!(detuned <= envelope + 1e-12);
    }

    #[test]
    fn closed_form_fidelity_sits_inside_the_unit_interval() {
        let p = fig3(ModeTruncation::new(10, 10));
        let target = TargetSpec::noon(2);
        let f = closed_form_fidelity(&p, &target, 1e-3, WeightConvention::Poisson).unwrap();
        assert!(f > 0.9 && f <= 1.0, "F = {f}");
        // The printed-weight variant is a different number.
        let alt =
            closed_form_fidelity(&p, &target, 1e-3, WeightConvention::PrintedSqrtFactorial)
                .unwrap();
        assert!((f - alt).abs() > 1e-6);
    }

    #[test]
    fn collision_scan_sorts_by_distance_and_skips_targets() {
        let p = fig3(ModeTruncation::new(10, 10));
        let target = TargetSpec::noon(2);
        let report = collision_scan(&p, &target, 5e-3, 5.0).unwrap();
        for pair in report.entries.windows(2) {
            assert!(pair[0].detuning.abs() <= pair[1].detuning.abs());
        }
        for e in &report.entries {
            let own = if e.tone == 1 {
                (target.n_1, target.m_1)
            } else {
                (target.n_2, target.m_2)
            };
            assert_ne!((e.n, e.m), own);
            assert!(e.detuning.abs() < 5.0 * 5e-3);
            assert!(e.peak_population > 0.0 && e.peak_population <= 1.0);
        }
    }

    #[test]
    fn lattice_directions_follow_the_slope_ratio() {
        // With slope_n / slope_m ~ 2.13 / 0.96, the first near-closure of
        // the tone-1 lattice needs m_k / n_k ~ 2.2; no closure survives a
        // tight threshold at these parameters.
        let p = fig3(ModeTruncation::new(10, 10));
        let target = TargetSpec::noon(2);
        let tight = collision_scan(&p, &target, 1e-3, 5.0).unwrap();
        for sol in &tight.lattice {
            assert!(sol.detuning.abs() < 5.0 * 1e-3);
        }
        // Loosening the threshold can only add solutions.
        let loose = collision_scan(&p, &target, 1e-2, 5.0).unwrap();
        assert!(loose.lattice.len() >= tight.lattice.len());
    }

    #[test]
    fn shift_ratio_reference_value() {
        let p = fig3(ModeTruncation::new(4, 4));
        let r = shift_ratio(&p).unwrap();
        assert!((r - 1.1).abs() < 1e-12, "ratio = {r}");
    }

    #[test]
    fn frequency_error_reduces_to_unity_when_calibrated() {
        let f = frequency_error_fidelity(0.0, 5e-3, 80.0, 100.0, PI / 4.0);
        assert!((f.exact - 1.0).abs() < 1e-12);
        assert!((f.renormalized - 1.0).abs() < 1e-12);
        assert!((f.second_order - 1.0).abs() < 1e-15);
    }

    #[test]
    fn frequency_error_quadratic_expansion_is_fourth_order_accurate() {
        let (omega, w1, w2, phi) = (5e-3, 80.0, 100.0, PI / 4.0);
        let gap = |eps: f64| {
            let f = frequency_error_fidelity(eps, omega, w1, w2, phi);
            (f.exact - f.second_order).abs()
        };
        let coarse = gap(4e-5);
        let fine = gap(2e-5);
        // Halving eps' shrinks the residual ~16x.
        assert!(coarse / fine > 12.0 && coarse / fine < 20.0, "ratio {}", coarse / fine);
    }

    #[test]
    fn frequency_error_is_monotone_for_a_single_block() {
        // With all weight on tone 1 the raw overlap decreases with eps'.
        let mut last = 1.0;
        for k in 1..=10 {
            let eps = 1e-5 * k as f64;
            let f = frequency_error_fidelity(eps, 5e-3, 80.0, 100.0, 0.0);
            assert!(f.exact < last);
            last = f.exact;
        }
    }

    #[test]
    fn misalignment_estimate_matches_the_stated_coefficient() {
        let p = 0.1;
        let theta = 0.02;
        let estimate = nonideal_measurement_fidelity(theta, p);
        assert!((estimate - (1.0 - (1.0 / p - 0.75) * theta * theta)).abs() < 1e-15);
    }
}
