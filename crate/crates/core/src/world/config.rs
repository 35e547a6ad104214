//! Structured-text description of a custom world (TOML or JSON).
//!
//! ```toml
//! budget = 1
//! initial_states = [0, 0]
//!
//! [[arms]]
//! rewards = [0.0, 1.0]
//! passive = [[1.0, 0.0], [1.0, 0.0]]
//! active = [[0.0, 1.0], [0.0, 1.0]]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ArmModel, Kernel, WorldModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSpec {
    pub rewards: Vec<f64>,
    pub passive: Vec<Vec<f64>>,
    pub active: Vec<Vec<f64>>,
    /// Repeat this arm `count` times.
    #[serde(default = "one")]
    pub count: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub budget: usize,
    pub arms: Vec<ArmSpec>,
    #[serde(default)]
    pub initial_states: Option<Vec<usize>>,
}

impl WorldConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
        } else {
            toml::from_str(&text).map_err(|e| Error::parse(path, e))
        }
    }

    pub fn build(&self) -> Result<WorldModel> {
        let mut arms = Vec::new();
        for (i, spec) in self.arms.iter().enumerate() {
            let arm = ArmModel::new(
                Kernel::from_rows(spec.passive.clone())?,
                Kernel::from_rows(spec.active.clone())?,
                spec.rewards.clone(),
            )
            .map_err(|e| Error::Config(format!("arm entry {i}: {e}")))?;
            arms.extend(std::iter::repeat_n(arm, spec.count));
        }
        match &self.initial_states {
            Some(states) => WorldModel::with_states(arms, self.budget, states.clone()),
            None => WorldModel::new(arms, self.budget),
        }
    }
}
