//! Visit counts, empirical kernels and Hoeffding confidence widths for every
//! arm's transition function.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{Action, Kernel};

/// Number of actions per arm.
pub const N_ACTIONS: usize = 2;

/// Hoeffding width shared by transition and preference estimates:
/// `min{1, sqrt(ln(4 |S| |A| N max{(k-1)H, 1} / eps) / max{2 z, 1})}`.
pub fn confidence_width(
    count: u64,
    episode: usize,
    horizon: usize,
    n_arms: usize,
    n_states: usize,
    n_actions: usize,
    epsilon: f64,
) -> f64 {
    let elapsed = (episode.saturating_sub(1) * horizon).max(1) as f64;
    let log_term = (4.0 * (n_states * n_actions * n_arms) as f64 * elapsed / epsilon).ln();
    let denom = (2.0 * count as f64).max(1.0);
    (log_term / denom).sqrt().min(1.0)
}

/// Constants that enter the confidence width besides the count and episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthParams {
    pub n_arms: usize,
    pub n_states: usize,
    pub horizon: usize,
    pub epsilon: f64,
}

impl WidthParams {
    pub fn width(&self, count: u64, episode: usize) -> f64 {
        confidence_width(
            count,
            episode,
            self.horizon,
            self.n_arms,
            self.n_states,
            N_ACTIONS,
            self.epsilon,
        )
    }
}

/// Empirical kernels of one arm, indexed `[action][s][s']`.
pub type KernelEstimate = [Vec<Vec<f64>>; N_ACTIONS];

/// Confidence widths of one arm, indexed `[action][s]`.
pub type WidthTable = [Vec<f64>; N_ACTIONS];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionEstimate {
    n_arms: usize,
    n_states: usize,
    /// `Z(s, a)` per arm, flattened `[n][s][a]`.
    visits: Vec<u64>,
    /// `Z(s, a, s')` per arm, flattened `[n][s][a][s']`.
    transitions: Vec<u64>,
}

impl TransitionEstimate {
    pub fn new(n_arms: usize, n_states: usize) -> Self {
        Self {
            n_arms,
            n_states,
            visits: vec![0; n_arms * n_states * N_ACTIONS],
            transitions: vec![0; n_arms * n_states * N_ACTIONS * n_states],
        }
    }

    pub fn n_arms(&self) -> usize {
        self.n_arms
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    fn sa(&self, n: usize, s: usize, a: Action) -> usize {
        (n * self.n_states + s) * N_ACTIONS + a.index()
    }

    fn check(&self, n: usize, s: usize) -> Result<()> {
        if n >= self.n_arms {
            return Err(Error::InvalidArm {
                arm: n,
                n_arms: self.n_arms,
            });
        }
        if s >= self.n_states {
            return Err(Error::InvalidState {
                state: s,
                n_states: self.n_states,
            });
        }
        Ok(())
    }

    pub fn record_transition(&mut self, n: usize, s: usize, a: Action, next: usize) -> Result<()> {
        self.check(n, s)?;
        self.check(n, next)?;
        let sa = self.sa(n, s, a);
        self.visits[sa] += 1;
        self.transitions[sa * self.n_states + next] += 1;
        Ok(())
    }

    pub fn visits(&self, n: usize, s: usize, a: Action) -> u64 {
        self.visits[self.sa(n, s, a)]
    }

    pub fn transitions(&self, n: usize, s: usize, a: Action, next: usize) -> u64 {
        self.transitions[self.sa(n, s, a) * self.n_states + next]
    }

    /// `P̂(.|s,a)`; rows never visited are uniform.
    pub fn empirical_row(&self, n: usize, s: usize, a: Action) -> Vec<f64> {
        let sa = self.sa(n, s, a);
        let z = self.visits[sa];
        if z == 0 {
            return vec![1.0 / self.n_states as f64; self.n_states];
        }
        let counts = &self.transitions[sa * self.n_states..(sa + 1) * self.n_states];
        counts.iter().map(|&c| c as f64 / z as f64).collect()
    }

    pub fn empirical_kernel(&self, n: usize) -> KernelEstimate {
        Action::ALL.map(|a| {
            (0..self.n_states)
                .map(|s| self.empirical_row(n, s, a))
                .collect()
        })
    }

    pub fn widths(&self, n: usize, params: &WidthParams, episode: usize) -> WidthTable {
        Action::ALL.map(|a| {
            (0..self.n_states)
                .map(|s| params.width(self.visits(n, s, a), episode))
                .collect()
        })
    }

    /// Whether `(passive, active)` lies entrywise within `δ(s,a)` of `P̂`.
    pub fn in_confidence_set(
        &self,
        n: usize,
        candidate: &[Kernel; N_ACTIONS],
        params: &WidthParams,
        episode: usize,
    ) -> Result<bool> {
        if n >= self.n_arms {
            return Err(Error::InvalidArm {
                arm: n,
                n_arms: self.n_arms,
            });
        }
        if candidate.iter().any(|k| k.n_states() != self.n_states) {
            return Err(Error::Shape(format!(
                "candidate kernel is not {0}x{0}",
                self.n_states
            )));
        }
        let widths = self.widths(n, params, episode);
        for a in Action::ALL {
            for s in 0..self.n_states {
                let width = widths[a.index()][s];
                let row = self.empirical_row(n, s, a);
                let inside = row
                    .iter()
                    .zip(candidate[a.index()].row(s))
                    .all(|(p_hat, p)| (p - p_hat).abs() <= width);
                if !inside {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    pub fn snapshot(&self, episode: usize) -> TransitionSnapshot {
        TransitionSnapshot {
            episode,
            estimate: self.clone(),
        }
    }
}

/// Checkpoint of the transition counts at an episode boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionSnapshot {
    pub episode: usize,
    pub estimate: TransitionEstimate,
}

impl TransitionSnapshot {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::parse(path, e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let snap: Self = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
        let est = &snap.estimate;
        let sa = est.n_arms * est.n_states * N_ACTIONS;
        if est.visits.len() != sa || est.transitions.len() != sa * est.n_states {
            return Err(Error::parse(
                path,
                "count tensors do not match the declared shape",
            ));
        }
        Ok(snap)
    }
}
