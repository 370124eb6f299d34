//! Scenario configuration documents.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::limit::{DEFAULT_GRID_SIZE, DEFAULT_TOLERANCE};
use crate::model::{AssignmentMode, Environment, FirmClass, ModelError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid field `{field}`: {reason}")]
    InvalidField { field: &'static str, reason: String },
    #[error("invalid environment: {0}")]
    Validation(#[from] ModelError),
}

impl ConfigError {
    /// Field named by the error, when the parser reported one.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Parse { message, .. } => {
                let start = message.find('`')? + 1;
                let len = message[start..].find('`')?;
                Some(&message[start..start + len])
            }
            ConfigError::InvalidField { field, .. } => Some(field),
            ConfigError::Validation(_) => None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    /// Free-form note; not part of the scenario and not hashed.
    #[serde(default)]
    #[allow(dead_code)]
    description: Option<String>,
    classes: Vec<FirmClass>,
    n: u64,
    horizon: f64,
    #[serde(default = "default_grid_size")]
    grid_size: u64,
    replicas: u64,
    thresholds: Vec<f64>,
    seed: u64,
    #[serde(default)]
    assignment_mode: AssignmentMode,
    #[serde(default = "default_tolerance")]
    ode_tolerance: f64,
}

fn default_grid_size() -> u64 {
    DEFAULT_GRID_SIZE as u64
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub environment: Environment,
    pub n: usize,
    pub horizon: f64,
    pub grid_size: usize,
    pub replicas: usize,
    /// Sorted ascending, without duplicates.
    pub thresholds: Vec<f64>,
    pub seed: u64,
    pub assignment_mode: AssignmentMode,
    pub ode_tolerance: f64,
}

impl ScenarioConfig {
    /// Uniform grid shared by every output of a run.
    pub fn t_grid(&self) -> Vec<f64> {
        let step = self.horizon / self.grid_size as f64;
        let mut grid: Vec<f64> = (0..=self.grid_size).map(|g| g as f64 * step).collect();
        grid[self.grid_size] = self.horizon;
        grid
    }

    /// Canonical JSON form, used for hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidField {
        field,
        reason: reason.into(),
    }
}

/// Parses and validates a JSON scenario document.
///
/// Defaults: `grid_size` 4096, `ode_tolerance` 1e-8,
/// `assignment_mode` `deterministic_proportions`.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    if raw.n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    if !(raw.horizon > 0.0 && raw.horizon.is_finite()) {
        return Err(invalid("horizon", "must be positive and finite"));
    }
    if raw.grid_size < 2 {
        return Err(invalid("grid_size", "must be at least 2"));
    }
    if raw.replicas == 0 {
        return Err(invalid("replicas", "must be at least 1"));
    }
    if !(raw.ode_tolerance > 0.0 && raw.ode_tolerance.is_finite()) {
        return Err(invalid("ode_tolerance", "must be positive and finite"));
    }
    if raw.thresholds.is_empty() {
        return Err(invalid("thresholds", "at least one threshold is required"));
    }
    if raw.thresholds.iter().any(|x| !x.is_finite()) {
        return Err(invalid("thresholds", "must be finite"));
    }
    let mut thresholds = raw.thresholds;
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let environment = Environment::new(raw.classes)?;
    Ok(ScenarioConfig {
        environment,
        n: raw.n as usize,
        horizon: raw.horizon,
        grid_size: raw.grid_size as usize,
        replicas: raw.replicas as usize,
        thresholds,
        seed: raw.seed,
        assignment_mode: raw.assignment_mode,
        ode_tolerance: raw.ode_tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCENARIO_A: &str = r#"{
        "classes": [
            {"alpha": 4, "beta": 4, "gamma": 3, "exposure": 1, "weight": 0.2},
            {"alpha": 0.1, "beta": 0.1, "gamma": 3, "exposure": 1, "weight": 0.8}
        ],
        "n": 125,
        "horizon": 5,
        "replicas": 1000,
        "thresholds": [0.25, 0.15, 0.15],
        "seed": 1
    }"#;

    #[test]
    fn scenario_a_with_defaults() {
        let cfg = parse_config(SCENARIO_A).unwrap();
        assert_eq!(cfg.environment.len(), 2);
        assert_eq!(cfg.n, 125);
        assert_eq!(cfg.horizon, 5.0);
        assert_eq!(cfg.grid_size, 4096);
        assert_eq!(cfg.ode_tolerance, 1e-8);
        assert_eq!(cfg.assignment_mode, AssignmentMode::DeterministicProportions);
        assert_eq!(cfg.thresholds, vec![0.15, 0.25]);
        let grid = cfg.t_grid();
        assert_eq!(grid.len(), 4097);
        assert_eq!(grid[0], 0.0);
        assert_eq!(grid[4096], 5.0);
    }

    #[test]
    fn weights_not_normalized() {
        let text = SCENARIO_A.replace("0.8", "0.7");
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(
            err,
            ConfigError::Validation(ModelError::WeightsDoNotSumToOne { .. })
        ));
    }

    #[test]
    fn missing_field_is_named() {
        let text = SCENARIO_A.replace("\"horizon\": 5,", "");
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Parse { .. }));
        assert_eq!(err.field(), Some("horizon"));
    }

    #[test]
    fn reports_line_of_syntax_error() {
        let err = parse_config("{\n  \"n\": 12,\n  oops\n}").unwrap_err();
        match err {
            ConfigError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn explicit_mode_and_bad_values() {
        let text = SCENARIO_A.replace("\"seed\": 1", "\"seed\": 1, \"assignment_mode\": \"iid_sample\"");
        assert_eq!(parse_config(&text).unwrap().assignment_mode, AssignmentMode::IidSample);
        let text = SCENARIO_A.replace("\"n\": 125", "\"n\": 0");
        assert_eq!(parse_config(&text).unwrap_err().field(), Some("n"));
        let text = SCENARIO_A.replace("\"horizon\": 5", "\"horizon\": -1");
        assert_eq!(parse_config(&text).unwrap_err().field(), Some("horizon"));
        let text = SCENARIO_A.replace("\"seed\": 1", "\"seed\": 1, \"colour\": 3");
        assert!(matches!(parse_config(&text).unwrap_err(), ConfigError::Parse { .. }));
    }

    #[test]
    fn canonical_json_is_stable() {
        let a = parse_config(SCENARIO_A).unwrap();
        let b = parse_config(&SCENARIO_A.replace("[0.25, 0.15, 0.15]", "[0.15, 0.25]")).unwrap();
        assert_eq!(a.canonical_json(), b.canonical_json());
    }
}
