//! Scenario files: a TOML document declaring one protocol run plus optional
//! sweep axes. Unknown keys are rejected so a typo cannot silently fall back
//! to a default. All physical quantities are in units of the bare coupling g
//! (times in 1/g), matching the library.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use entangler_core::dynamics::{DecoherenceRates, IntegratorConfig};
use entangler_core::hamiltonian::{DriveSpec, QutritType, Schedule, SystemParams, TargetSpec};
use entangler_core::hilbert::ModeTruncation;
use entangler_core::protocol::{MeasurementSpec, RunOptions, Scenario};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    /// Scenario identifier echoed into every CSV row.
    pub id: String,
    /// Default output path; `--out` takes precedence, stdout if neither.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Detuning window (in units of omega) for the collisions command.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collision_threshold: Option<f64>,
    pub system: SystemSection,
    pub target: TargetSection,
    pub drive: DriveSection,
    #[serde(default)]
    pub decoherence: DecoherenceSection,
    #[serde(default)]
    pub measurement: MeasurementSection,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepAxis>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    /// Coupling topology: "lambda", "delta" or "xi".
    pub qutrit: String,
    pub omega_a: f64,
    pub omega_b: f64,
    pub omega_e: f64,
    pub omega_f: f64,
    pub g_a: f64,
    pub g_b: f64,
    #[serde(default)]
    pub g_ab: f64,
    /// Fock cutoffs [n_max_a, n_max_b]; fitted to the target when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation: Option<[usize; 2]>,
    /// Added to both cutoffs after fitting (convergence checks).
    #[serde(default, skip_serializing_if = "is_zero_i64")]
    pub truncation_bump: i64,
}

fn is_zero_i64(v: &i64) -> bool {
    *v == 0
}

/// Exactly one of `noon`, `bell`, or the four explicit labels.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noon: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bell: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_1: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_1: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_2: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_2: Option<usize>,
    /// Coherent seed amplitudes; default 1.0 each.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    pub omega: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub epsilon_prime: f64,
    /// "simultaneous" (default) or "sequential".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<String>,
    /// Explicit tone frequencies; planned from the dressed gaps when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_2: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoherenceSection {
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub kappa_a: f64,
    #[serde(default)]
    pub kappa_b: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSection {
    #[serde(default)]
    pub theta_1: f64,
    #[serde(default)]
    pub theta_2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default = "default_points_per_period")]
    pub points_per_period: f64,
    #[serde(default)]
    pub resonant_only: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monitor_every: Option<usize>,
}

fn default_points_per_period() -> f64 {
    20.0
}

impl Default for IntegratorSection {
    fn default() -> Self {
        Self {
            points_per_period: default_points_per_period(),
            resonant_only: false,
            dt: None,
            monitor_every: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted parameter path, e.g. "drive.omega" or "target.noon".
    pub param: String,
    pub values: Vec<f64>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config parse error: {e}")))
    }

    /// Canonical serialization used for the header hash: the resolved
    /// content (after `--set`), independent of file formatting.
    pub fn canonical(&self) -> Result<String, CliError> {
        toml::to_string(self)
            .map_err(|e| CliError::Config(format!("config serialization error: {e}")))
    }

    /// Applies one `key=value` override; the same paths serve `--set` and
    /// the sweep axes.
    pub fn set(&mut self, path: &str, value: &str) -> Result<(), CliError> {
        let bad_value = |what: &str| {
            CliError::Config(format!("invalid value {value:?} for {path} (expected {what})"))
        };
        let as_f64 = || value.parse::<f64>().map_err(|_| bad_value("a number"));
        let as_usize = || value.parse::<usize>().map_err(|_| bad_value("a non-negative integer"));
        match path {
            "system.omega_a" => self.system.omega_a = as_f64()?,
            "system.omega_b" => self.system.omega_b = as_f64()?,
            "system.omega_e" => self.system.omega_e = as_f64()?,
            "system.omega_f" => self.system.omega_f = as_f64()?,
            "system.g_a" => self.system.g_a = as_f64()?,
            "system.g_b" => self.system.g_b = as_f64()?,
            "system.g_ab" => self.system.g_ab = as_f64()?,
            "system.qutrit" => self.system.qutrit = value.to_string(),
            "system.truncation_bump" => {
                self.system.truncation_bump =
                    value.parse::<i64>().map_err(|_| bad_value("an integer"))?
            }
            // Sets omega_e so that (omega_f - omega_b)/(omega_f - omega_e -
            // omega_a) equals the requested dispersive-slope ratio.
            "system.ratio" => {
                let ratio = as_f64()?;
                if ratio == 0.0 {
                    return Err(bad_value("a nonzero ratio"));
                }
                let s = &mut self.system;
                s.omega_e = s.omega_f - s.omega_a - (s.omega_f - s.omega_b) / ratio;
            }
            "target.noon" => {
                let n = value
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.fract() == 0.0 && *v >= 1.0)
                    .map(|v| v as usize)
                    .ok_or_else(|| bad_value("a positive integer"))?;
                self.target = TargetSection {
                    noon: Some(n),
                    alpha: self.target.alpha,
                    beta: self.target.beta,
                    ..TargetSection::default()
                };
            }
            "target.alpha" => self.target.alpha = Some(as_f64()?),
            "target.beta" => self.target.beta = Some(as_f64()?),
            "drive.omega" => self.drive.omega = as_f64()?,
            "drive.epsilon" => self.drive.epsilon = as_f64()?,
            "drive.epsilon_prime" => self.drive.epsilon_prime = as_f64()?,
            "drive.omega_1" => self.drive.omega_1 = Some(as_f64()?),
            "drive.omega_2" => self.drive.omega_2 = Some(as_f64()?),
            "drive.schedule" => self.drive.schedule = Some(value.to_string()),
            "decoherence.gamma" => self.decoherence.gamma = as_f64()?,
            // Qutrit rate plus the resonators at a tenth of it, the
            // convention every decoherence table in the library's tests uses.
            "decoherence.uniform" => {
                let gamma = as_f64()?;
                self.decoherence.gamma = gamma;
                self.decoherence.kappa_a = 0.1 * gamma;
                self.decoherence.kappa_b = 0.1 * gamma;
            }
            "decoherence.kappa_a" => self.decoherence.kappa_a = as_f64()?,
            "decoherence.kappa_b" => self.decoherence.kappa_b = as_f64()?,
            "measurement.theta_1" => self.measurement.theta_1 = as_f64()?,
            "measurement.theta_2" => self.measurement.theta_2 = as_f64()?,
            "integrator.points_per_period" => self.integrator.points_per_period = as_f64()?,
            "integrator.resonant_only" => {
                self.integrator.resonant_only =
                    value.parse::<bool>().map_err(|_| bad_value("true or false"))?
            }
            "integrator.dt" => self.integrator.dt = Some(as_f64()?),
            "integrator.monitor_every" => self.integrator.monitor_every = Some(as_usize()?),
            "collision_threshold" => self.collision_threshold = Some(as_f64()?),
            _ => {
                return Err(CliError::Config(format!("unknown parameter path {path:?}")));
            }
        }
        Ok(())
    }

    /// Builds the library scenario this config declares (sweep axes are the
    /// caller's business).
    pub fn resolve(&self) -> Result<Scenario, CliError> {
        let target = self.resolve_target()?;
        let params = self.resolve_params(&target)?;
        target
            .validate(&params.truncation)
            .map_err(CliError::from)?;

        let mut drive = DriveSpec::planned(&params, &target, self.drive.omega)?;
        drive.epsilon = self.drive.epsilon;
        drive.epsilon_prime = self.drive.epsilon_prime;
        if let Some(w) = self.drive.omega_1 {
            drive.omega_1 = w;
        }
        if let Some(w) = self.drive.omega_2 {
            drive.omega_2 = w;
        }
        if let Some(name) = &self.drive.schedule {
            drive.schedule = match name.as_str() {
                "simultaneous" => Schedule::Simultaneous,
                "sequential" => Schedule::Sequential,
                other => {
                    return Err(CliError::Config(format!(
                        "unknown schedule {other:?} (expected \"simultaneous\" or \"sequential\")"
                    )));
                }
            };
        }

        let mut measurement = MeasurementSpec::for_params(&params);
        measurement.theta_1 = self.measurement.theta_1;
        measurement.theta_2 = self.measurement.theta_2;

        let options = RunOptions {
            resonant_only: self.integrator.resonant_only,
            points_per_period: self.integrator.points_per_period,
            integrator: self.integrator.dt.map(|dt| IntegratorConfig {
                dt,
                monitor_every: self.integrator.monitor_every.unwrap_or(50),
            }),
        };

        Ok(Scenario {
            params,
            target,
            drive,
            measurement,
            rates: DecoherenceRates {
                gamma: self.decoherence.gamma,
                kappa_a: self.decoherence.kappa_a,
                kappa_b: self.decoherence.kappa_b,
            },
            options,
        })
    }

    fn resolve_target(&self) -> Result<TargetSpec, CliError> {
        let t = &self.target;
        let explicit = [t.n_1, t.m_1, t.n_2, t.m_2];
        let forms = [
            t.noon.is_some(),
            t.bell == Some(true),
            explicit.iter().any(Option::is_some),
        ];
        if forms.iter().filter(|f| **f).count() != 1 {
            return Err(CliError::Config(
                "target must use exactly one form: noon = N, bell = true, or n_1/m_1/n_2/m_2"
                    .into(),
            ));
        }
        let mut spec = if let Some(n) = t.noon {
            TargetSpec::noon(n)
        } else if t.bell == Some(true) {
            TargetSpec::bell()
        } else {
            let [n_1, m_1, n_2, m_2] = explicit.map(|v| {
                v.ok_or_else(|| {
                    CliError::Config("explicit target needs all of n_1, m_1, n_2, m_2".into())
                })
            });
            TargetSpec::new(n_1?, m_1?, n_2?, m_2?, 1.0, 1.0)
        };
        if let Some(a) = t.alpha {
            spec.alpha = a;
        }
        if let Some(b) = t.beta {
            spec.beta = b;
        }
        Ok(spec)
    }

    fn resolve_params(&self, target: &TargetSpec) -> Result<SystemParams, CliError> {
        let s = &self.system;
        let qutrit = match s.qutrit.as_str() {
            "lambda" => QutritType::Lambda,
            "delta" => QutritType::Delta,
            "xi" => QutritType::Xi,
            other => {
                return Err(CliError::Config(format!(
                    "unknown qutrit type {other:?} (expected \"lambda\", \"delta\" or \"xi\")"
                )));
            }
        };
        let base = match s.truncation {
            Some([n, m]) => ModeTruncation::new(n, m),
            None => target.default_truncation(),
        };
        let bump = |cutoff: usize| -> usize {
            (cutoff as i64 + s.truncation_bump).max(1) as usize
        };
        Ok(SystemParams {
            qutrit,
            omega_a: s.omega_a,
            omega_b: s.omega_b,
            omega_e: s.omega_e,
            omega_f: s.omega_f,
            g_a: s.g_a,
            g_b: s.g_b,
            g_ab: s.g_ab,
            truncation: ModeTruncation::new(bump(base.n_max_a), bump(base.n_max_b)),
        })
    }
}

/// Expands the Cartesian product of the sweep axes in declaration order
/// (first axis slowest), returning each point's resolved config.
pub fn expand_sweep(raw: &RawConfig) -> Result<Vec<RawConfig>, CliError> {
    for axis in &raw.sweep {
        if axis.values.is_empty() {
            return Err(CliError::Config(format!(
                "sweep axis {:?} has an empty value list",
                axis.param
            )));
        }
    }
    let total: usize = raw.sweep.iter().map(|a| a.values.len()).product();
    let mut points = Vec::with_capacity(total);
    for mut flat in 0..total {
        let mut point = raw.clone();
        for axis in raw.sweep.iter().rev() {
            let idx = flat % axis.values.len();
            flat /= axis.values.len();
            point.set(&axis.param, &format!("{}", axis.values[idx]))?;
        }
        points.push(point);
    }
    Ok(points)
}
