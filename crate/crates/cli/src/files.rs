//! JSON model and policy files.
//!
//! A finite model file looks like
//!
//! ```json
//! {
//!   "states": 2,
//!   "actions": [[0, 1], [0, 1]],
//!   "rates": [[[-1, 1], [-3, 3]], [[2, -2], [1, -1]]],
//!   "reward": [[2, 2], [0, 0]],
//!   "costs": [],
//!   "bounds": [],
//!   "alpha": 1.0,
//!   "gamma": [1, 0]
//! }
//! ```
//!
//! `rates[x][k]` is the full row `q(·|x, a_k)` over the states, where `a_k` is
//! the `k`-th label in `actions[x]`; `costs[n][x][k]` is cost `n` at the same
//! pair. `costs` and `bounds` may be omitted for an unconstrained model.

use std::fs;
use std::path::Path;

use ctmdp_core::{FiniteCtmdp, StationaryPolicy};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub states: usize,
    pub actions: Vec<Vec<usize>>,
    pub rates: Vec<Vec<Vec<f64>>>,
    pub reward: Vec<Vec<f64>>,
    #[serde(default)]
    pub costs: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub bounds: Vec<f64>,
    pub alpha: f64,
    pub gamma: Vec<f64>,
}

impl ModelFile {
    pub fn into_model(self) -> Result<FiniteCtmdp, CliError> {
        if self.states != self.actions.len() {
            return Err(CliError::Structure(format!(
                "\"states\" is {} but \"actions\" lists {} states",
                self.states,
                self.actions.len()
            )));
        }
        Ok(FiniteCtmdp::new(
            self.actions,
            self.rates,
            self.reward,
            self.costs,
            self.bounds,
            self.alpha,
            self.gamma,
        )?)
    }

    pub fn from_model(model: &FiniteCtmdp) -> Self {
        Self {
            states: model.num_states(),
            actions: model.actions().to_vec(),
            rates: model.rates().to_vec(),
            reward: model.reward_table().to_vec(),
            costs: model.cost_tables().to_vec(),
            bounds: model.bounds().to_vec(),
            alpha: model.alpha(),
            gamma: model.gamma().to_vec(),
        }
    }
}

/// Stationary policy by per-state probabilities (aligned with the model's
/// action lists) or by one action label per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyFile {
    #[serde(default)]
    pub probs: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub choice: Option<Vec<usize>>,
}

impl PolicyFile {
    pub fn into_policy(self, model: &FiniteCtmdp) -> Result<StationaryPolicy, CliError> {
        match (self.probs, self.choice) {
            (Some(probs), None) => {
                if probs.len() != model.num_states() {
                    return Err(CliError::Structure(format!(
                        "policy has {} rows, model has {} states",
                        probs.len(),
                        model.num_states()
                    )));
                }
                for (x, row) in probs.iter().enumerate() {
                    if row.len() != model.num_actions(x) {
                        return Err(CliError::Structure(format!(
                            "policy row {x} has {} entries, state {x} has {} actions",
                            row.len(),
                            model.num_actions(x)
                        )));
                    }
                }
                Ok(StationaryPolicy::new(probs)?)
            }
            (None, Some(labels)) => {
                if labels.len() != model.num_states() {
                    return Err(CliError::Structure(format!(
                        "policy chooses {} actions, model has {} states",
                        labels.len(),
                        model.num_states()
                    )));
                }
                let choice = labels
                    .iter()
                    .enumerate()
                    .map(|(x, label)| {
                        model.actions()[x].iter().position(|a| a == label).ok_or_else(|| {
                            CliError::Structure(format!("action {label} is not admissible at state {x}"))
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(StationaryPolicy::deterministic(model, &choice)?)
            }
            _ => Err(CliError::Structure(
                "policy file needs exactly one of \"probs\" and \"choice\"".into(),
            )),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Parse {
        path: path.display().to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn load_model(path: &Path) -> Result<FiniteCtmdp, CliError> {
    let file: ModelFile = parse(path, &read(path)?)?;
    file.into_model()
}

pub fn load_policy(path: &Path, model: &FiniteCtmdp) -> Result<StationaryPolicy, CliError> {
    let file: PolicyFile = parse(path, &read(path)?)?;
    file.into_policy(model)
}
