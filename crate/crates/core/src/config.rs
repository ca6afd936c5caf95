//! Experiment configuration: the JSON file schema and its validated form.
//!
//! Only `theta`, `quantizer` and `reference` are required; everything else
//! has a default reproducing the two-coefficient example plant with
//! standard normal noise:
//!
//! | field            | default                                         |
//! |------------------|-------------------------------------------------|
//! | `noise`          | `{"kind": "gaussian", "sigma": 1.0}`             |
//! | `omega`          | box `[-6, 6] × [-2, 2]`                          |
//! | `theta_hat0`     | `[5, 0]`                                         |
//! | `epsilon_guard`  | `1e-6` (`null` disables the guard)               |
//! | `horizon`        | `10000`                                          |
//! | `trials`         | `200`                                            |
//! | `master_seed`    | `1`                                              |
//! | `checkpoints`    | 10 per decade, plus the horizon                  |
//! | `window`         | `3` (excitation window length `h`)               |
//! | `mu`             | `0.1` (minimum-phase margin threshold)           |
//! | `enforce_assumptions` | `false`                                     |
//! | `comment`        | free text, ignored                              |
//!
//! `quantizer` is either `"standard"` (thresholds `[-2, 0, 2]`, weights
//! `[80, 50, -50, -80]`) or an object `{"thresholds": [...], "weights": [...]}`.

use serde::{Deserialize, Serialize};

use crate::controller::DEFAULT_EPSILON_GUARD;
use crate::error::{HarnessError, ModelError};
use crate::model::{OmegaSet, ParamVec, QuantizerSpec, ReferenceSignal};
use crate::noise::NoiseModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QuantizerField {
    Preset(String),
    Explicit { thresholds: Vec<f64>, weights: Vec<f64> },
}

impl QuantizerField {
    pub fn resolve(&self) -> Result<QuantizerSpec, HarnessError> {
        match self {
            QuantizerField::Preset(name) if name == "standard" => Ok(QuantizerSpec::standard()),
            QuantizerField::Preset(name) => Err(HarnessError::InvalidConfig(format!(
                "unknown quantizer preset {name:?}"
            ))),
            QuantizerField::Explicit {
                thresholds,
                weights,
            } => Ok(QuantizerSpec::new(thresholds.clone(), weights.clone())?),
        }
    }
}

/// The config file as written on disk, before validation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub theta: [f64; 2],
    pub quantizer: Option<QuantizerField>,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub omega: OmegaSet,
    #[serde(default = "default_theta_hat0")]
    pub theta_hat0: [f64; 2],
    #[serde(default = "default_guard")]
    pub epsilon_guard: Option<f64>,
    pub reference: ReferenceSignal,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default)]
    pub checkpoints: Option<Vec<usize>>,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default)]
    pub enforce_assumptions: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
}

fn default_theta_hat0() -> [f64; 2] {
    [5.0, 0.0]
}
fn default_guard() -> Option<f64> {
    Some(DEFAULT_EPSILON_GUARD)
}
fn default_horizon() -> usize {
    10_000
}
fn default_trials() -> usize {
    200
}
fn default_seed() -> u64 {
    1
}
fn default_window() -> usize {
    3
}
fn default_mu() -> f64 {
    0.1
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Logarithmic checkpoints, `per_decade` per factor of ten, from 1 up to
/// and including `horizon`.
pub fn log_checkpoints(horizon: usize, per_decade: usize) -> Vec<usize> {
    let mut out = Vec::new();
    if horizon == 0 {
        return out;
    }
    let top = (horizon as f64).log10() * per_decade as f64;
    let mut j = 0usize;
    while j as f64 <= top + 1e-9 {
        let k = 10f64.powf(j as f64 / per_decade as f64).round() as usize;
        if k >= 1 && k <= horizon && out.last() != Some(&k) {
            out.push(k);
        }
        j += 1;
    }
    if out.last() != Some(&horizon) {
        out.push(horizon);
    }
    out
}

/// Validated experiment description shared read-only by every trial.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub theta: ParamVec,
    pub quantizer: QuantizerSpec,
    pub noise: NoiseModel,
    pub omega: OmegaSet,
    pub theta_hat0: ParamVec,
    pub epsilon_guard: Option<f64>,
    pub reference: ReferenceSignal,
    pub horizon: usize,
    pub trials: usize,
    pub master_seed: u64,
    pub checkpoints: Vec<usize>,
    pub window: usize,
    pub mu: f64,
    pub enforce_assumptions: bool,
}

impl ExperimentConfig {
    /// The two-coefficient example: `θ = [4, 1]`, `θ̂(0) = [5, 0]`, the
    /// preset quantizer, standard normal noise, box `[-6, 6] × [-2, 2]` and
    /// the alternating jittered reference.
    pub fn example(horizon: usize, trials: usize, master_seed: u64) -> Self {
        ExperimentConfig {
            theta: ParamVec::new(4.0, 1.0),
            quantizer: QuantizerSpec::standard(),
            noise: NoiseModel::standard_normal(),
            omega: OmegaSet::default(),
            theta_hat0: ParamVec::new(5.0, 0.0),
            epsilon_guard: Some(DEFAULT_EPSILON_GUARD),
            reference: ReferenceSignal::alternating(),
            horizon,
            trials,
            master_seed,
            checkpoints: log_checkpoints(horizon, 10),
            window: 3,
            mu: 0.1,
            enforce_assumptions: false,
        }
    }

    pub fn from_file(file: ConfigFile) -> Result<Self, HarnessError> {
        let quantizer = file
            .quantizer
            .as_ref()
            .ok_or_else(|| HarnessError::InvalidConfig("missing field `quantizer`".into()))?
            .resolve()?;
        let checkpoints = match file.checkpoints {
            Some(c) => c,
            None => log_checkpoints(file.horizon, 10),
        };
        let config = ExperimentConfig {
            theta: file.theta.into(),
            quantizer,
            noise: file.noise,
            omega: file.omega,
            theta_hat0: file.theta_hat0.into(),
            epsilon_guard: file.epsilon_guard,
            reference: file.reference,
            horizon: file.horizon,
            trials: file.trials,
            master_seed: file.master_seed,
            checkpoints,
            window: file.window,
            mu: file.mu,
            enforce_assumptions: file.enforce_assumptions,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let file = ConfigFile::from_json(text).map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        Self::from_file(file)
    }

    /// Replaces the checkpoints with the default logarithmic grid for the
    /// current horizon.
    pub fn reset_checkpoints(&mut self) {
        self.checkpoints = log_checkpoints(self.horizon, 10);
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if !self.theta.is_finite() {
            return Err(ModelError::NonFiniteValue { what: "theta" }.into());
        }
        if !self.theta_hat0.is_finite() {
            return Err(ModelError::NonFiniteValue { what: "theta_hat0" }.into());
        }
        self.noise.validate()?;
        self.omega.validate()?;
        self.reference.validate()?;
        if !self.omega.contains(self.theta_hat0) {
            return Err(HarnessError::InvalidConfig(format!(
                "theta_hat0 {:?} lies outside omega",
                <[f64; 2]>::from(self.theta_hat0)
            )));
        }
        if let Some(eps) = self.epsilon_guard {
            if !(eps.is_finite() && eps > 0.0) {
                return Err(HarnessError::InvalidConfig(format!(
                    "epsilon_guard must be positive, got {eps}"
                )));
            }
        }
        if self.horizon == 0 {
            return Err(HarnessError::InvalidConfig("horizon must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(HarnessError::InvalidConfig("trials must be at least 1".into()));
        }
        if self.checkpoints.is_empty() || self.checkpoints[0] == 0 {
            return Err(HarnessError::InvalidConfig(
                "checkpoints must be nonempty and start at k >= 1".into(),
            ));
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HarnessError::InvalidConfig(
                "checkpoints must be strictly increasing".into(),
            ));
        }
        if *self.checkpoints.last().unwrap() > self.horizon {
            return Err(HarnessError::InvalidConfig(format!(
                "checkpoint {} exceeds horizon {}",
                self.checkpoints.last().unwrap(),
                self.horizon
            )));
        }
        if self.window <= 2 {
            return Err(crate::error::AnalysisError::WindowTooShort { h: self.window }.into());
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(HarnessError::InvalidConfig(format!(
                "mu must be nonnegative, got {}",
                self.mu
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"{
        "theta": [4, 1],
        "quantizer": "standard",
        "reference": {"kind": "alternating"},
        "comment": "free text is ignored"
    }"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_json(EXAMPLE).unwrap();
        let p = ExperimentConfig::example(10_000, 200, 1);
        assert_eq!(c.theta, p.theta);
        assert_eq!(c.quantizer, p.quantizer);
        assert_eq!(c.noise, p.noise);
        assert_eq!(c.omega, p.omega);
        assert_eq!(c.theta_hat0, p.theta_hat0);
        assert_eq!(c.epsilon_guard, p.epsilon_guard);
        assert_eq!(c.checkpoints, p.checkpoints);
        assert_eq!(c.window, 3);
    }

    #[test]
    fn null_guard_disables() {
        let text = EXAMPLE.replace("\"comment\"", "\"epsilon_guard\": null, \"comment\"");
        assert_eq!(ExperimentConfig::from_json(&text).unwrap().epsilon_guard, None);
    }

    #[test]
    fn explicit_quantizer_is_validated() {
        let text = EXAMPLE.replace(
            "\"standard\"",
            r#"{"thresholds": [0, 0], "weights": [1, 0, -1]}"#,
        );
        let err = ExperimentConfig::from_json(&text).unwrap_err();
        assert!(err.to_string().starts_with("NonAscendingThresholds"), "{err}");
    }

    #[test]
    fn short_window_rejected() {
        let text = EXAMPLE.replace("\"comment\"", "\"window\": 2, \"comment\"");
        let err = ExperimentConfig::from_json(&text).unwrap_err();
        assert!(err.to_string().starts_with("WindowTooShort"), "{err}");
    }

    #[test]
    fn unknown_field_rejected() {
        let text = EXAMPLE.replace("\"comment\"", "\"N\": 3, \"comment\"");
        assert!(ConfigFile::from_json(&text).is_err());
    }

    #[test]
    fn checkpoint_grid() {
        let c = log_checkpoints(10_000, 10);
        assert_eq!(c.first(), Some(&1));
        assert_eq!(c.last(), Some(&10_000));
        assert!(c.windows(2).all(|w| w[0] < w[1]));
        assert!(c.contains(&100) && c.contains(&1000));
        assert_eq!(log_checkpoints(1, 10), vec![1]);
        assert_eq!(*log_checkpoints(150, 10).last().unwrap(), 150);
    }
}
