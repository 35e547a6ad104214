//! Ground-truth environment: arm MDPs, the Bradley–Terry comparison oracle
//! and state transitions.
//!
//! Nothing in here is visible to the learners. Policies only ever see arm
//! states and comparison bits, which the harness passes along.

mod config;
mod envs;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use config::{ArmSpec, WorldConfig};
pub use envs::{
    armman_bounds, armman_types, build_app_marketing, build_armman, build_cpap, cpap_general_arm,
    cpap_high_risk_arm, sample_armman_arm, ArmmanType, CpapMix, Environment, ARMMAN_ROW_RETRIES,
};

/// Row sums of every kernel must be within this of one.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// Lower end of the Bradley–Terry range when rewards live in `[0, 1]`.
pub fn bt_lower() -> f64 {
    1.0 / (1.0 + std::f64::consts::E)
}

/// Upper end of the Bradley–Terry range when rewards live in `[0, 1]`.
pub fn bt_upper() -> f64 {
    std::f64::consts::E / (1.0 + std::f64::consts::E)
}

/// Binary action of a restless arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Passive = 0,
    Active = 1,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Passive, Action::Active];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_active(active: bool) -> Self {
        if active {
            Action::Active
        } else {
            Action::Passive
        }
    }
}

/// Square row-stochastic transition matrix, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Kernel {
    n: usize,
    data: Vec<f64>,
}

impl Kernel {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Config("kernel has no rows".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for (s, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::Shape(format!(
                    "kernel row {s} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::Config(format!(
                    "kernel row {s} has a negative or non-finite entry"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::Config(format!("kernel row {s} sums to {sum}")));
            }
            data.extend(row);
        }
        Ok(Self { n, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for s in 0..n {
            data[s * n + s] = 1.0;
        }
        Self { n, data }
    }

    pub fn n_states(&self) -> usize {
        self.n
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.data[s * self.n..(s + 1) * self.n]
    }

    pub fn get(&self, s: usize, next: usize) -> f64 {
        self.data[s * self.n + next]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n)
    }
}

impl TryFrom<Vec<Vec<f64>>> for Kernel {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Kernel::from_rows(rows)
    }
}

impl From<Kernel> for Vec<Vec<f64>> {
    fn from(k: Kernel) -> Self {
        k.rows().map(<[f64]>::to_vec).collect()
    }
}

/// One restless arm: two transition kernels and a latent reward per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmModel {
    pub kernel_passive: Kernel,
    pub kernel_active: Kernel,
    pub rewards: Vec<f64>,
}

impl ArmModel {
    pub fn new(kernel_passive: Kernel, kernel_active: Kernel, rewards: Vec<f64>) -> Result<Self> {
        let n = kernel_passive.n_states();
        if kernel_active.n_states() != n || rewards.len() != n {
            return Err(Error::Shape(format!(
                "arm has passive kernel of size {n}, active kernel of size {} and {} rewards",
                kernel_active.n_states(),
                rewards.len()
            )));
        }
        if let Some(r) = rewards.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::Config(format!("reward {r} outside [0, 1]")));
        }
        Ok(Self {
            kernel_passive,
            kernel_active,
            rewards,
        })
    }

    pub fn n_states(&self) -> usize {
        self.rewards.len()
    }

    pub fn kernel(&self, action: Action) -> &Kernel {
        match action {
            Action::Passive => &self.kernel_passive,
            Action::Active => &self.kernel_active,
        }
    }
}

/// Global index of `(arm, state)` in the `N|S| x N|S|` preference matrix.
pub fn global_index(arm: usize, state: usize, n_states: usize) -> usize {
    arm * n_states + state
}

/// The full system: arms, budget and the current state of every arm.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldModel {
    arms: Vec<ArmModel>,
    budget: usize,
    states: Vec<usize>,
}

impl WorldModel {
    /// All arms start in state 0.
    pub fn new(arms: Vec<ArmModel>, budget: usize) -> Result<Self> {
        let n = arms.len();
        Self::with_states(arms, budget, vec![0; n])
    }

    pub fn with_states(arms: Vec<ArmModel>, budget: usize, states: Vec<usize>) -> Result<Self> {
        let Some(first) = arms.first() else {
            return Err(Error::Config("world has no arms".into()));
        };
        let n_states = first.n_states();
        if arms.iter().any(|a| a.n_states() != n_states) {
            return Err(Error::Config(
                "all arms must share the same state space".into(),
            ));
        }
        if budget == 0 || budget > arms.len() {
            return Err(Error::Config(format!(
                "budget {budget} must lie in 1..={}",
                arms.len()
            )));
        }
        if states.len() != arms.len() {
            return Err(Error::Shape(format!(
                "{} initial states for {} arms",
                states.len(),
                arms.len()
            )));
        }
        if let Some(&state) = states.iter().find(|&&s| s >= n_states) {
            return Err(Error::InvalidState { state, n_states });
        }
        Ok(Self {
            arms,
            budget,
            states,
        })
    }

    pub fn arms(&self) -> &[ArmModel] {
        &self.arms
    }

    pub fn arm(&self, n: usize) -> &ArmModel {
        &self.arms[n]
    }

    pub fn n_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn n_states(&self) -> usize {
        self.arms[0].n_states()
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn set_states(&mut self, states: Vec<usize>) -> Result<()> {
        *self = Self::with_states(std::mem::take(&mut self.arms), self.budget, states)?;
        Ok(())
    }

    pub fn reward(&self, arm: usize, state: usize) -> f64 {
        self.arms[arm].rewards[state]
    }

    /// True preference `F((m,s_m),(n,s_n))` between two (arm, state) pairs.
    pub fn preference(&self, (m, s_m): (usize, usize), (n, s_n): (usize, usize)) -> f64 {
        bt_preference(self.reward(m, s_m), self.reward(n, s_n))
    }

    /// Draws one comparison bit: `true` when `(m, s_m)` is preferred.
    pub fn compare<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        first: (usize, usize),
        second: (usize, usize),
    ) -> bool {
        sample_comparison(rng, self.preference(first, second))
    }

    /// Moves every arm one step. `active[n]` is arm `n`'s action.
    pub fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R, active: &[bool]) -> Result<()> {
        if active.len() != self.arms.len() {
            return Err(Error::Shape(format!(
                "{} actions for {} arms",
                active.len(),
                self.arms.len()
            )));
        }
        for (n, arm) in self.arms.iter().enumerate() {
            let a = Action::from_active(active[n]);
            self.states[n] = step_arm(rng, arm, self.states[n], a)?;
        }
        Ok(())
    }

    /// Stable textual fingerprint of the world's parameters (not its states).
    pub fn fingerprint(&self) -> String {
        use std::fmt::Write;
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |x: f64| {
            for b in x.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        feed(self.budget as f64);
        for arm in &self.arms {
            for a in Action::ALL {
                arm.kernel(a).data.iter().copied().for_each(&mut feed);
            }
            arm.rewards.iter().copied().for_each(&mut feed);
        }
        let mut out = String::new();
        let _ = write!(out, "{:016x}", h);
        out
    }
}

/// Bradley–Terry probability that a side with reward `r_m` beats `r_n`.
pub fn bt_preference(r_m: f64, r_n: f64) -> f64 {
    // logistic of the difference; the two orientations sum to one exactly
    // only when computed through the same expression
    let d = r_m - r_n;
    if d >= 0.0 {
        1.0 / (1.0 + (-d).exp())
    } else {
        1.0 - 1.0 / (1.0 + d.exp())
    }
}

/// Bernoulli draw with success probability `p`; consumes one `f64` draw.
pub fn sample_comparison<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    rng.gen::<f64>() < p
}

/// Samples an index from a probability row using one uniform draw.
pub fn sample_row<R: Rng + ?Sized>(rng: &mut R, row: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding slack: land on the last state with positive mass
    row.iter().rposition(|p| *p > 0.0).unwrap_or(row.len() - 1)
}

pub fn step_arm<R: Rng + ?Sized>(
    rng: &mut R,
    arm: &ArmModel,
    s: usize,
    a: Action,
) -> Result<usize> {
    let n_states = arm.n_states();
    if s >= n_states {
        return Err(Error::InvalidState { state: s, n_states });
    }
    Ok(sample_row(rng, arm.kernel(a).row(s)))
}
