//! JSON configuration of the subcommands and of scenario suites.

use std::path::Path;

use serde::{Deserialize, Serialize};

use barostab_core::evolve::RunConfig;
use barostab_core::relenergy::DecayCriteria;
use barostab_core::steady::SolverOptions;
use barostab_core::{BoundaryData, EosSpec, Geometry};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadyConfig {
    pub eos: EosSpec,
    pub geometry: Geometry,
    pub boundary: BoundaryData,
    #[serde(default)]
    pub solver: SolverOptions,
}

/// Thresholds of the decay verdict that override the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DecayExpectations {
    pub uptick_tolerance: Option<f64>,
    pub decay_factor: Option<f64>,
    pub slack_tolerance: Option<f64>,
}

impl DecayExpectations {
    pub fn criteria(&self, run: &RunConfig) -> DecayCriteria {
        self.with_transient(run.transient_time())
    }

    pub fn with_transient(&self, transient: f64) -> DecayCriteria {
        let d = DecayCriteria::default();
        DecayCriteria {
            transient,
            uptick_tolerance: self.uptick_tolerance.unwrap_or(d.uptick_tolerance),
            decay_factor: self.decay_factor.or(d.decay_factor),
            slack_tolerance: self.slack_tolerance.unwrap_or(d.slack_tolerance),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveConfig {
    #[serde(flatten)]
    pub run: RunConfig,
    #[serde(default)]
    pub expectations: DecayExpectations,
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// `u_B^+ - u_B^-` at fixed `u_B^-`.
    UBPlusMinusGap,
    /// Exterior boundary speed.
    UB,
    /// Perturbation amplitude.
    Amplitude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: EvolveConfig,
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub eos: EosSpec,
    pub boundary: BoundaryData,
    pub r_list: Vec<f64>,
    #[serde(default)]
    pub solver: SolverOptions,
}

/// A named entry of a scenario suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum ScenarioConfig {
    Steady { config: SteadyConfig },
    Evolve { config: EvolveConfig },
    Sweep { config: SweepConfig },
    Compare { config: CompareConfig },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(flatten)]
    pub config: ScenarioConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suite {
    pub scenarios: Vec<Scenario>,
}

impl Suite {
    pub fn load(path: &Path) -> CliResult<Self> {
        let suite: Suite = load_json(path)?;
        let mut names: Vec<&str> = suite.scenarios.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(CliError::Config(format!("duplicate scenario name {:?} in {}", w[0], path.display())));
        }
        Ok(suite)
    }

    pub fn get(&self, name: &str) -> CliResult<&Scenario> {
        self.scenarios
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| CliError::Config(format!("no scenario named {name:?}")))
    }
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
