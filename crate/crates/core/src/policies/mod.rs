//! Decision makers: the optimistic preference learner, the full-knowledge
//! oracle, uniform random activation and the MLE plug-in baseline.
//!
//! Learning policies are built from a [`LearnerConfig`], which carries only
//! public facts about the system (sizes, budget, horizon). They see arm
//! states, their own activations, comparison bits and next states through
//! [`StepFeedback`], and nothing else.

mod mle;

use std::str::FromStr;

use log::warn;
use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::{build_elp, build_exact_lp, build_occupancy_lp, select_top_b, solve_lp};
use crate::preference::{
    build_reference_column, schedule_duels, ComparisonLedger, Entry, PreferenceEstimate,
};
use crate::transitions::{TransitionEstimate, WidthParams};
use crate::world::{global_index, Action, WorldModel};

pub use mle::{gradient, log_likelihood, mle_fit_rewards, MleConfig, MleRewardFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Dopl,
    Oracle,
    Random,
    MleLp,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [Self::Dopl, Self::Oracle, Self::Random, Self::MleLp];

    pub fn name(self) -> &'static str {
        match self {
            Self::Dopl => "dopl",
            Self::Oracle => "oracle",
            Self::Random => "random",
            Self::MleLp => "mle_lp",
        }
    }

    /// Whether the policy asks for comparisons each step.
    pub fn uses_preferences(self) -> bool {
        matches!(self, Self::Dopl | Self::MleLp)
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "dopl" => Ok(Self::Dopl),
            "oracle" => Ok(Self::Oracle),
            "random" => Ok(Self::Random),
            "mle_lp" | "mlelp" | "mle" => Ok(Self::MleLp),
            other => Err(Error::Config(format!("unknown policy `{other}`"))),
        }
    }
}

/// What a learner is allowed to know before interacting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub n_arms: usize,
    pub n_states: usize,
    pub budget: usize,
    pub horizon: usize,
    pub epsilon: f64,
    pub reference: Entry,
    pub mle: MleConfig,
}

impl LearnerConfig {
    /// Copies the public sizes of `world`.
    pub fn for_world(world: &WorldModel, horizon: usize, epsilon: f64, reference: Entry) -> Self {
        Self {
            n_arms: world.n_arms(),
            n_states: world.n_states(),
            budget: world.budget(),
            horizon,
            epsilon,
            reference,
            mle: MleConfig::default(),
        }
    }

    pub fn width_params(&self) -> WidthParams {
        WidthParams {
            n_arms: self.n_arms,
            n_states: self.n_states,
            horizon: self.horizon,
            epsilon: self.epsilon,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_arms == 0 || self.n_states == 0 {
            return Err(Error::Config(
                "learner needs at least one arm and one state".into(),
            ));
        }
        if self.budget == 0 || self.budget > self.n_arms {
            return Err(Error::Config(format!(
                "budget {} outside 1..={}",
                self.budget, self.n_arms
            )));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be positive".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!(
                "epsilon {} outside (0, 1)",
                self.epsilon
            )));
        }
        let (arm, state) = self.reference;
        if arm >= self.n_arms {
            return Err(Error::InvalidArm {
                arm,
                n_arms: self.n_arms,
            });
        }
        if state >= self.n_states {
            return Err(Error::InvalidState {
                state,
                n_states: self.n_states,
            });
        }
        if self.mle.reg.is_nan() || self.mle.reg <= 0.0 {
            return Err(Error::Config("MLE regularization must be positive".into()));
        }
        Ok(())
    }
}

/// One comparison: `first` and `second` are `(arm, state)` entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuelOutcome {
    pub first: Entry,
    pub second: Entry,
    pub first_won: bool,
}

/// Everything a policy observes about one decision epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFeedback<'a> {
    pub states: &'a [usize],
    pub active: &'a [bool],
    pub duels: &'a [DuelOutcome],
    pub next_states: &'a [usize],
}

/// Read-only view of a policy's current estimates, for diagnostics.
#[derive(Debug, Clone, Copy, Default)]
pub struct Internals<'a> {
    pub indices: Option<&'a [f64]>,
    pub transitions: Option<&'a TransitionEstimate>,
    pub preference: Option<&'a PreferenceEstimate>,
    pub mle: Option<&'a MleRewardFit>,
}

/// Running totals of what a learner has recorded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub transitions: u64,
    pub duels: u64,
}

pub trait Policy: Send {
    fn kind(&self) -> PolicyKind;

    /// Called once before the first step of episode `episode` (1-based).
    fn begin_episode(&mut self, episode: usize) -> Result<()>;

    /// Arms to activate, ascending, exactly `B` of them.
    fn select(&mut self, states: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize>;

    /// Arm pairs to compare among the activated set.
    fn schedule_duels(&mut self, _active: &[usize], _rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
        Vec::new()
    }

    fn observe(&mut self, _feedback: &StepFeedback<'_>) -> Result<()> {
        Ok(())
    }

    fn internals(&self) -> Internals<'_> {
        Internals::default()
    }

    fn counters(&self) -> Counters {
        Counters::default()
    }
}

/// Shared state of the two learning policies.
#[derive(Debug, Clone)]
struct Learner {
    cfg: LearnerConfig,
    ledger: ComparisonLedger,
    trans: TransitionEstimate,
    indices: Vec<f64>,
    fallbacks: usize,
}

impl Learner {
    fn new(cfg: LearnerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            ledger: ComparisonLedger::new(cfg.n_arms, cfg.n_states),
            trans: TransitionEstimate::new(cfg.n_arms, cfg.n_states),
            indices: vec![0.0; cfg.n_arms * cfg.n_states],
            fallbacks: 0,
            cfg,
        })
    }

    fn select(&self, states: &[usize]) -> Vec<usize> {
        select_by_index(&self.indices, states, self.cfg.n_states, self.cfg.budget)
    }

    fn observe(&mut self, fb: &StepFeedback<'_>) -> Result<()> {
        for d in fb.duels {
            self.ledger.record_duel(d.first, d.second, d.first_won)?;
        }
        for (n, (&s, &next)) in fb.states.iter().zip(fb.next_states).enumerate() {
            self.trans
                .record_transition(n, s, Action::from_active(fb.active[n]), next)?;
        }
        Ok(())
    }

    fn counters(&self) -> Counters {
        let n = self.cfg.n_arms;
        let transitions = (0..n)
            .flat_map(|arm| (0..self.cfg.n_states).map(move |s| (arm, s)))
            .flat_map(|(arm, s)| Action::ALL.map(|a| self.trans.visits(arm, s, a)))
            .sum();
        Counters {
            transitions,
            duels: self.ledger.total_duels(),
        }
    }

    fn adopt(&mut self, solution: crate::planner::OccupancySolution, episode: usize, who: &str) {
        if solution.is_optimal() {
            self.indices = solution.indices();
        } else {
            self.fallbacks += 1;
            warn!(
                "{who}: LP {:?} in episode {episode} ({}); keeping previous indices",
                solution.status,
                solution.message.as_deref().unwrap_or("no detail")
            );
        }
    }
}

fn select_by_index(
    indices: &[f64],
    states: &[usize],
    n_states: usize,
    budget: usize,
) -> Vec<usize> {
    let per_arm: Vec<f64> = states
        .iter()
        .enumerate()
        .map(|(n, &s)| indices[global_index(n, s, n_states)])
        .collect();
    select_top_b(&per_arm, budget)
}

/// Optimistic learner: confidence balls on kernels, an optimistic reference
/// column of preferences, and the extended LP solved once per episode.
#[derive(Debug, Clone)]
pub struct Dopl {
    inner: Learner,
    pref: PreferenceEstimate,
}

impl Dopl {
    pub fn new(cfg: LearnerConfig) -> Result<Self> {
        let inner = Learner::new(cfg)?;
        let c = &inner.cfg;
        let pref = PreferenceEstimate::prior(c.n_arms, c.n_states, c.reference);
        Ok(Self { inner, pref })
    }

    pub fn ledger(&self) -> &ComparisonLedger {
        &self.inner.ledger
    }

    pub fn transitions(&self) -> &TransitionEstimate {
        &self.inner.trans
    }

    pub fn preference(&self) -> &PreferenceEstimate {
        &self.pref
    }

    pub fn indices(&self) -> &[f64] {
        &self.inner.indices
    }

    /// Episodes whose LP failed and reused the previous indices.
    pub fn fallbacks(&self) -> usize {
        self.inner.fallbacks
    }

    /// Rebuilds the preference column and the indices for `episode`.
    pub fn plan_episode(&mut self, episode: usize) -> Result<&[f64]> {
        let c = &self.inner.cfg;
        let params = c.width_params();
        self.pref = build_reference_column(&self.inner.ledger, c.reference, episode, &params);
        let lp = build_elp(&self.inner.trans, &self.pref, c.budget, &params, episode)?;
        self.inner.adopt(solve_lp(&lp), episode, "dopl");
        Ok(&self.inner.indices)
    }
}

impl Policy for Dopl {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Dopl
    }

    fn begin_episode(&mut self, episode: usize) -> Result<()> {
        self.plan_episode(episode).map(|_| ())
    }

    fn select(&mut self, states: &[usize], _rng: &mut ChaCha8Rng) -> Vec<usize> {
        self.inner.select(states)
    }

    fn schedule_duels(&mut self, active: &[usize], rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
        schedule_duels(rng, active)
    }

    fn observe(&mut self, feedback: &StepFeedback<'_>) -> Result<()> {
        self.inner.observe(feedback)
    }

    fn internals(&self) -> Internals<'_> {
        Internals {
            indices: Some(&self.inner.indices),
            transitions: Some(&self.inner.trans),
            preference: Some(&self.pref),
            mle: None,
        }
    }

    fn counters(&self) -> Counters {
        self.inner.counters()
    }
}

/// Index policy from the exact LP with true rewards and kernels.
#[derive(Debug, Clone)]
pub struct Oracle {
    indices: Vec<f64>,
    n_states: usize,
    budget: usize,
    value: f64,
}

impl Oracle {
    pub fn new(world: &WorldModel) -> Result<Self> {
        let rewards: Vec<f64> = world
            .arms()
            .iter()
            .flat_map(|a| a.rewards.iter().copied())
            .collect();
        let solution = solve_lp(&build_exact_lp(world, &rewards)?).into_optimal()?;
        Ok(Self {
            indices: solution.indices(),
            n_states: world.n_states(),
            budget: world.budget(),
            value: solution.objective_value,
        })
    }

    pub fn indices(&self) -> &[f64] {
        &self.indices
    }

    /// Optimal per-step value of the relaxed problem.
    pub fn value(&self) -> f64 {
        self.value
    }
}

impl Policy for Oracle {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Oracle
    }

    fn begin_episode(&mut self, _episode: usize) -> Result<()> {
        Ok(())
    }

    fn select(&mut self, states: &[usize], _rng: &mut ChaCha8Rng) -> Vec<usize> {
        select_by_index(&self.indices, states, self.n_states, self.budget)
    }

    fn internals(&self) -> Internals<'_> {
        Internals {
            indices: Some(&self.indices),
            ..Internals::default()
        }
    }
}

/// Uniformly random `B`-subset every step.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    n_arms: usize,
    budget: usize,
}

impl RandomPolicy {
    pub fn new(n_arms: usize, budget: usize) -> Result<Self> {
        if budget == 0 || budget > n_arms {
            return Err(Error::Config(format!(
                "budget {budget} outside 1..={n_arms}"
            )));
        }
        Ok(Self { n_arms, budget })
    }
}

impl Policy for RandomPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Random
    }

    fn begin_episode(&mut self, _episode: usize) -> Result<()> {
        Ok(())
    }

    fn select(&mut self, _states: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
        let mut arms = sample(rng, self.n_arms, self.budget).into_vec();
        arms.sort_unstable();
        arms
    }
}

/// Plug-in baseline: BT maximum-likelihood rewards and empirical kernels in
/// the exact LP, refit at every episode boundary.
#[derive(Debug, Clone)]
pub struct MleLp {
    inner: Learner,
    fit: MleRewardFit,
}

impl MleLp {
    pub fn new(cfg: LearnerConfig) -> Result<Self> {
        let inner = Learner::new(cfg)?;
        let m = inner.cfg.n_arms * inner.cfg.n_states;
        Ok(Self {
            inner,
            fit: MleRewardFit {
                r_hat: vec![0.0; m],
                log_likelihood: 0.0,
                iterations: 0,
                converged: true,
            },
        })
    }

    pub fn fit(&self) -> &MleRewardFit {
        &self.fit
    }

    pub fn indices(&self) -> &[f64] {
        &self.inner.indices
    }

    pub fn plan_episode(&mut self, episode: usize) -> Result<&[f64]> {
        let c = &self.inner.cfg;
        let fit = mle_fit_rewards(
            &self.inner.ledger,
            c.reference,
            &c.mle,
            Some(&self.fit.r_hat),
        );
        if !fit.converged {
            warn!("mle_lp: fit did not converge in episode {episode}; using best iterate");
        }
        self.fit = fit;
        let kernels: Vec<_> = (0..c.n_arms)
            .map(|n| self.inner.trans.empirical_kernel(n))
            .collect();
        let lp = build_occupancy_lp(&kernels, &self.fit.r_hat, c.budget)?;
        self.inner.adopt(solve_lp(&lp), episode, "mle_lp");
        Ok(&self.inner.indices)
    }
}

impl Policy for MleLp {
    fn kind(&self) -> PolicyKind {
        PolicyKind::MleLp
    }

    fn begin_episode(&mut self, episode: usize) -> Result<()> {
        self.plan_episode(episode).map(|_| ())
    }

    fn select(&mut self, states: &[usize], _rng: &mut ChaCha8Rng) -> Vec<usize> {
        self.inner.select(states)
    }

    fn schedule_duels(&mut self, active: &[usize], rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
        schedule_duels(rng, active)
    }

    fn observe(&mut self, feedback: &StepFeedback<'_>) -> Result<()> {
        self.inner.observe(feedback)
    }

    fn internals(&self) -> Internals<'_> {
        Internals {
            indices: Some(&self.inner.indices),
            transitions: Some(&self.inner.trans),
            preference: None,
            mle: Some(&self.fit),
        }
    }

    fn counters(&self) -> Counters {
        self.inner.counters()
    }
}

/// Builds a policy. Only the oracle reads `world` beyond its public sizes.
pub fn build_policy(
    kind: PolicyKind,
    world: &WorldModel,
    cfg: LearnerConfig,
) -> Result<Box<dyn Policy>> {
    Ok(match kind {
        PolicyKind::Dopl => Box::new(Dopl::new(cfg)?),
        PolicyKind::Oracle => Box::new(Oracle::new(world)?),
        PolicyKind::Random => Box::new(RandomPolicy::new(cfg.n_arms, cfg.budget)?),
        PolicyKind::MleLp => Box::new(MleLp::new(cfg)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{build_app_marketing, build_cpap, ArmModel, CpapMix, Kernel};
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn toy_world(n: usize, budget: usize) -> WorldModel {
        let arm = ArmModel::new(
            Kernel::from_rows(vec![vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap(),
            Kernel::from_rows(vec![vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap(),
            vec![0.0, 1.0],
        )
        .unwrap();
        WorldModel::new(vec![arm; n], budget).unwrap()
    }

    #[test]
    fn parses_policy_names() {
        for k in PolicyKind::ALL {
            assert_eq!(k.name().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("ucb".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn oracle_on_toy_always_activates() {
        let world = toy_world(1, 1);
        let mut oracle = Oracle::new(&world).unwrap();
        assert!((oracle.value() - 1.0).abs() < 1e-6);
        for s in 0..2 {
            assert_eq!(oracle.select(&[s], &mut rng(0)), vec![0]);
        }
    }

    #[test]
    fn oracle_indices_ignore_reward_shift() {
        let world = build_cpap(CpapMix::default()).unwrap();
        let base = Oracle::new(&world).unwrap();
        let shifted_arms: Vec<ArmModel> = world
            .arms()
            .iter()
            .map(|a| {
                let mut a = a.clone();
                a.rewards.iter_mut().for_each(|r| *r = (*r * 0.5) + 0.25);
                a
            })
            .collect();
        // affine map with positive slope: same ordering of every LP solution
        let scaled = WorldModel::new(shifted_arms, world.budget()).unwrap();
        let other = Oracle::new(&scaled).unwrap();
        let states = vec![0; world.n_arms()];
        let mut r = rng(0);
        assert_eq!(
            base.clone().select(&states, &mut r),
            other.clone().select(&states, &mut r)
        );
    }

    #[test]
    fn random_policy_is_uniform_and_reproducible() {
        let mut p = RandomPolicy::new(10, 4).unwrap();
        let mut r = rng(3);
        let mut freq = [0usize; 10];
        let steps = 10_000;
        for _ in 0..steps {
            let sel = p.select(&[], &mut r);
            assert_eq!(sel.len(), 4);
            assert!(sel.windows(2).all(|w| w[0] < w[1]));
            sel.iter().for_each(|&a| freq[a] += 1);
        }
        for f in freq {
            assert!((f as f64 / steps as f64 - 0.4).abs() < 0.02);
        }
        let a: Vec<_> = (0..5).map(|_| p.select(&[], &mut rng(9))).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(
            RandomPolicy::new(5, 5).unwrap().select(&[], &mut r),
            vec![0, 1, 2, 3, 4]
        );
    }

    #[test]
    fn dopl_cold_start_is_well_defined() {
        let world = build_app_marketing();
        let cfg = LearnerConfig::for_world(&world, 100, 1e-5, (0, 0));
        let mut dopl = Dopl::new(cfg).unwrap();
        let idx = dopl.plan_episode(1).unwrap().to_vec();
        assert!(idx.iter().all(|x| (0.0..=1.0).contains(x)));
        assert!(dopl
            .preference()
            .q_tilde
            .iter()
            .enumerate()
            .all(|(g, &q)| g == 0 || q == 1.0));
        assert_eq!(dopl.fallbacks(), 0);
        assert_eq!(dopl.select(world.states(), &mut rng(0)).len(), 4);
    }

    #[test]
    fn dopl_is_replay_deterministic() {
        let world = build_cpap(CpapMix::default()).unwrap();
        let cfg = LearnerConfig::for_world(&world, 10, 1e-2, (0, 0));
        let run = || {
            let mut d = Dopl::new(cfg.clone()).unwrap();
            let mut r = rng(5);
            d.plan_episode(1).unwrap();
            let states = vec![0; 20];
            let active_set = d.select(&states, &mut r);
            let mut active = vec![false; 20];
            active_set.iter().for_each(|&a| active[a] = true);
            let duels: Vec<DuelOutcome> = d
                .schedule_duels(&active_set, &mut r)
                .into_iter()
                .map(|(i, j)| DuelOutcome {
                    first: (i, 0),
                    second: (j, 0),
                    first_won: i < j,
                })
                .collect();
            let next = vec![2; 20];
            d.observe(&StepFeedback {
                states: &states,
                active: &active,
                duels: &duels,
                next_states: &next,
            })
            .unwrap();
            d.plan_episode(2).unwrap().to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn learner_counts_all_transitions_and_b_minus_one_duels() {
        let world = build_cpap(CpapMix::default()).unwrap();
        let cfg = LearnerConfig::for_world(&world, 10, 1e-2, (0, 0));
        let mut d = MleLp::new(cfg).unwrap();
        d.begin_episode(1).unwrap();
        let mut r = rng(1);
        let states = vec![1; 20];
        let sel = d.select(&states, &mut r);
        assert_eq!(sel.len(), 8);
        let pairs = d.schedule_duels(&sel, &mut r);
        assert_eq!(pairs.len(), 7);
        let duels: Vec<_> = pairs
            .iter()
            .map(|&(i, j)| DuelOutcome {
                first: (i, 1),
                second: (j, 1),
                first_won: true,
            })
            .collect();
        let mut active = vec![false; 20];
        sel.iter().for_each(|&a| active[a] = true);
        d.observe(&StepFeedback {
            states: &states,
            active: &active,
            duels: &duels,
            next_states: &states,
        })
        .unwrap();
        assert_eq!(
            d.counters(),
            Counters {
                transitions: 20,
                duels: 7
            }
        );
    }

    #[test]
    fn mle_plug_in_with_truth_matches_oracle() {
        let world = toy_world(3, 1);
        let oracle = Oracle::new(&world).unwrap();
        let kernels = crate::planner::world_kernels(&world);
        let rewards: Vec<f64> = world
            .arms()
            .iter()
            .flat_map(|a| a.rewards.clone())
            .collect();
        let sol = solve_lp(&build_occupancy_lp(&kernels, &rewards, 1).unwrap());
        assert_eq!(sol.indices(), oracle.indices());
    }

    #[test]
    fn rejects_bad_learner_config() {
        let world = toy_world(2, 1);
        let mut cfg = LearnerConfig::for_world(&world, 10, 0.1, (0, 0));
        cfg.reference = (5, 0);
        assert!(Dopl::new(cfg.clone()).is_err());
        cfg.reference = (0, 0);
        cfg.epsilon = 0.0;
        assert!(MleLp::new(cfg).is_err());
    }
}
