//! Experiment orchestration: builds the world, runs the interaction loop for
//! `K` episodes of `H` steps, keeps the books on latent reward and regret,
//! and writes CSV/JSON artifacts.
//!
//! Random streams are split by purpose so that changing the policy never
//! perturbs the environment build: stream 0 builds the world, stream 1 drives
//! transitions and comparison bits, stream 2 belongs to the policy.

mod output;

use serde::{Deserialize, Serialize};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::planner::{build_exact_lp, solve_lp};
use crate::policies::{
    build_policy, Counters, DuelOutcome, Internals, LearnerConfig, MleConfig, Oracle, PolicyKind,
    StepFeedback,
};
use crate::preference::Entry;
use crate::world::{
    build_app_marketing, build_armman, build_cpap, global_index, Action, CpapMix, Environment,
    WorldConfig, WorldModel,
};

pub use output::{
    aggregate_rows, emit_outputs, read_cumulative_regret, run_stem, write_aggregate_csv,
    write_run_csv, AggregateRow, Manifest, AGGREGATE_HEADER, CSV_HEADER,
};

const STREAM_BUILD: u64 = 0;
const STREAM_DYNAMICS: u64 = 1;
const STREAM_POLICY: u64 = 2;

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Which arms' latent rewards count towards the logged reward.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardAccounting {
    #[default]
    AllArms,
    ActiveOnly,
}

/// What per-episode regret is measured against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    /// `H * J*`, with `J*` the exact LP optimum.
    #[default]
    LpValue,
    /// Realized reward of the oracle index policy on the same seed.
    OracleRollout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Episode counts and horizons of the published experiments.
    Full,
    /// About a quarter of the episodes, for quick runs.
    Desk,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Self::Full),
            "desk" => Ok(Self::Desk),
            other => Err(Error::Config(format!("unknown preset `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub episodes: usize,
    pub horizon: usize,
    pub epsilon: f64,
    pub seed: u64,
    /// Overrides the environment's budget.
    pub budget: Option<usize>,
    pub reference: Entry,
    pub accounting: RewardAccounting,
    pub benchmark: Benchmark,
    pub diagnostics: bool,
    pub mle: MleConfig,
}

impl ExperimentConfig {
    pub fn preset(env: Environment, preset: Preset) -> Self {
        let (episodes, horizon) = match (env, preset) {
            (Environment::AppMarketing, Preset::Full) => (4000, 100),
            (Environment::AppMarketing, Preset::Desk) => (1000, 100),
            (Environment::Cpap, Preset::Full) => (300, 1000),
            (Environment::Cpap, Preset::Desk) => (75, 1000),
            (Environment::Armman, Preset::Full) => (20_000, 5),
            (Environment::Armman, Preset::Desk) => (5000, 5),
            (Environment::Custom, Preset::Full) => (400, 100),
            (Environment::Custom, Preset::Desk) => (100, 100),
        };
        Self {
            episodes,
            horizon,
            epsilon: 1e-5,
            seed: 0,
            budget: None,
            reference: (0, 0),
            accounting: RewardAccounting::AllArms,
            benchmark: Benchmark::LpValue,
            diagnostics: true,
            mle: MleConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 || self.horizon == 0 {
            return Err(Error::Config(
                "episodes and horizon must be positive".into(),
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!(
                "epsilon {} outside (0, 1)",
                self.epsilon
            )));
        }
        if self.budget == Some(0) {
            return Err(Error::Config("budget must be positive".into()));
        }
        if self.mle.reg.is_nan() || self.mle.reg <= 0.0 {
            return Err(Error::Config("MLE regularization must be positive".into()));
        }
        Ok(())
    }
}

/// Environment to simulate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvSpec {
    AppMarketing,
    Cpap(CpapMix),
    Armman,
    Custom(WorldConfig),
}

impl EnvSpec {
    pub fn standard(env: Environment) -> Result<Self> {
        match env {
            Environment::AppMarketing => Ok(Self::AppMarketing),
            Environment::Cpap => Ok(Self::Cpap(CpapMix::default())),
            Environment::Armman => Ok(Self::Armman),
            Environment::Custom => Err(Error::Config(
                "custom environment needs a world file".into(),
            )),
        }
    }

    pub fn environment(&self) -> Environment {
        match self {
            Self::AppMarketing => Environment::AppMarketing,
            Self::Cpap(_) => Environment::Cpap,
            Self::Armman => Environment::Armman,
            Self::Custom(_) => Environment::Custom,
        }
    }

    /// Builds the world for `seed`; only ARMMAN consumes randomness.
    pub fn build(&self, seed: u64, budget: Option<usize>) -> Result<WorldModel> {
        let world = match self {
            Self::AppMarketing => build_app_marketing(),
            Self::Cpap(mix) => build_cpap(*mix)?,
            Self::Armman => build_armman(&mut stream(seed, STREAM_BUILD))?,
            Self::Custom(cfg) => cfg.build()?,
        };
        match budget {
            Some(b) if b != world.budget() => {
                WorldModel::with_states(world.arms().to_vec(), b, world.states().to_vec())
            }
            _ => Ok(world),
        }
    }
}

/// Root-mean-square estimation errors against the true model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub index_error: Option<f64>,
    pub f_error: Option<f64>,
    pub p_error: Option<f64>,
    pub r_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    /// 1-based.
    pub episode: usize,
    pub episodic_reward: f64,
    /// Activation count of every arm during the episode.
    pub activations: Vec<u64>,
    pub duels: u64,
    pub diagnostics: Diagnostics,
}

/// One decision epoch as seen by an [`Observer`].
#[derive(Debug, Clone, Copy)]
pub struct StepRecord<'a> {
    pub episode: usize,
    pub step: usize,
    pub states: &'a [usize],
    pub active: &'a [usize],
    pub duels: &'a [DuelOutcome],
    pub next_states: &'a [usize],
    pub counters_before: Counters,
    pub counters_after: Counters,
}

/// Hooks into a running experiment.
pub trait Observer {
    fn on_step(&mut self, _step: &StepRecord<'_>) {}

    /// Called after planning, before the first step of the episode.
    fn on_episode_start(&mut self, _episode: usize, _internals: Internals<'_>) {}
}

impl Observer for () {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub environment: Environment,
    pub policy: PolicyKind,
    pub config: ExperimentConfig,
    pub fingerprint: String,
    pub n_arms: usize,
    pub n_states: usize,
    pub budget: usize,
    pub logs: Vec<EpisodeLog>,
}

pub fn run_experiment(
    env: &EnvSpec,
    policy: PolicyKind,
    cfg: &ExperimentConfig,
) -> Result<RunOutput> {
    run_experiment_observed(env, policy, cfg, &mut ())
}

/// The interaction loop: plan at each episode boundary, then per step
/// activate, duel, transition and report back to the policy. Episode
/// boundaries carry states over.
pub fn run_experiment_observed(
    env: &EnvSpec,
    kind: PolicyKind,
    cfg: &ExperimentConfig,
    observer: &mut dyn Observer,
) -> Result<RunOutput> {
    cfg.validate()?;
    let mut world = env.build(cfg.seed, cfg.budget)?;
    let mut learner = LearnerConfig::for_world(&world, cfg.horizon, cfg.epsilon, cfg.reference);
    learner.mle = cfg.mle;
    let mut policy = build_policy(kind, &world, learner)?;

    let oracle_indices = if cfg.diagnostics {
        Some(Oracle::new(&world)?.indices().to_vec())
    } else {
        None
    };
    let truth = world.clone();

    let mut env_rng = stream(cfg.seed, STREAM_DYNAMICS);
    let mut pol_rng = stream(cfg.seed, STREAM_POLICY);
    let n_arms = world.n_arms();
    let budget = world.budget();
    let mut logs = Vec::with_capacity(cfg.episodes);

    for episode in 1..=cfg.episodes {
        policy.begin_episode(episode)?;
        let diagnostics = match &oracle_indices {
            Some(oi) => diagnose(&truth, cfg.reference, oi, policy.internals()),
            None => Diagnostics::default(),
        };
        observer.on_episode_start(episode, policy.internals());

        let mut log = EpisodeLog {
            episode,
            episodic_reward: 0.0,
            activations: vec![0; n_arms],
            duels: 0,
            diagnostics,
        };
        let mut mask = vec![false; n_arms];
        for step in 0..cfg.horizon {
            let states = world.states().to_vec();
            let active = policy.select(&states, &mut pol_rng);
            check_activation(&active, n_arms, budget)?;
            mask.iter_mut().for_each(|m| *m = false);
            active.iter().for_each(|&a| mask[a] = true);

            log.episodic_reward += match cfg.accounting {
                RewardAccounting::AllArms => (0..n_arms).map(|n| world.reward(n, states[n])).sum(),
                RewardAccounting::ActiveOnly => active
                    .iter()
                    .map(|&n| world.reward(n, states[n]))
                    .sum::<f64>(),
            };
            active.iter().for_each(|&a| log.activations[a] += 1);

            let duels: Vec<DuelOutcome> = policy
                .schedule_duels(&active, &mut pol_rng)
                .into_iter()
                .map(|(i, j)| {
                    if !mask[i] || !mask[j] || i == j {
                        return Err(Error::Config(format!(
                            "policy asked to compare arms {i} and {j}"
                        )));
                    }
                    let (first, second) = ((i, states[i]), (j, states[j]));
                    let first_won = world.compare(&mut env_rng, first, second);
                    Ok(DuelOutcome {
                        first,
                        second,
                        first_won,
                    })
                })
                .collect::<Result<_>>()?;
            log.duels += duels.len() as u64;

            world.advance(&mut env_rng, &mask)?;
            let counters_before = policy.counters();
            policy.observe(&StepFeedback {
                states: &states,
                active: &mask,
                duels: &duels,
                next_states: world.states(),
            })?;
            observer.on_step(&StepRecord {
                episode,
                step,
                states: &states,
                active: &active,
                duels: &duels,
                next_states: world.states(),
                counters_before,
                counters_after: policy.counters(),
            });
        }
        logs.push(log);
    }

    Ok(RunOutput {
        environment: env.environment(),
        policy: kind,
        config: cfg.clone(),
        fingerprint: truth.fingerprint(),
        n_arms,
        n_states: truth.n_states(),
        budget,
        logs,
    })
}

fn check_activation(active: &[usize], n_arms: usize, budget: usize) -> Result<()> {
    let ok = active.len() == budget
        && active.windows(2).all(|w| w[0] < w[1])
        && active.iter().all(|&a| a < n_arms);
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "policy returned an invalid activation set {active:?}"
        )))
    }
}

fn rms(it: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = it.fold((0.0, 0usize), |(s, n), e| (s + e * e, n + 1));
    (n > 0).then(|| (sum / n as f64).sqrt())
}

/// Estimation errors of a policy's internals against the true model.
pub fn diagnose(
    world: &WorldModel,
    reference: Entry,
    oracle_indices: &[f64],
    view: Internals<'_>,
) -> Diagnostics {
    let n_states = world.n_states();
    let entries: Vec<Entry> = (0..world.n_arms())
        .flat_map(|n| (0..n_states).map(move |s| (n, s)))
        .collect();
    let r_ref = world.reward(reference.0, reference.1);
    let true_f = |e: Entry| world.preference(e, reference);
    let true_q = |e: Entry| world.reward(e.0, e.1) - r_ref;

    let index_error = view
        .indices
        .and_then(|idx| rms(idx.iter().zip(oracle_indices).map(|(a, b)| a - b)));

    let p_error = view.transitions.and_then(|t| {
        rms((0..world.n_arms()).flat_map(|n| {
            let est = t.empirical_kernel(n);
            let arm = world.arm(n);
            Action::ALL.into_iter().flat_map(move |a| {
                let k = arm.kernel(a);
                let est_a = est[a.index()].clone();
                (0..n_states).flat_map(move |s| {
                    let row = est_a[s].clone();
                    (0..n_states).map(move |next| row[next] - k.get(s, next))
                })
            })
        }))
    });

    let (f_error, r_error) = if let Some(p) = view.preference {
        let g = |e: Entry| global_index(e.0, e.1, n_states);
        (
            rms(entries.iter().map(|&e| p.f_hat[g(e)] - true_f(e))),
            rms(entries.iter().map(|&e| p.q_tilde[g(e)] - true_q(e))),
        )
    } else if let Some(fit) = view.mle {
        let g = |e: Entry| global_index(e.0, e.1, n_states);
        let r0 = fit.r_hat[g(reference)];
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        (
            rms(entries
                .iter()
                .map(|&e| sig(fit.r_hat[g(e)] - r0) - true_f(e))),
            rms(entries.iter().map(|&e| fit.r_hat[g(e)] - r0 - true_q(e))),
        )
    } else {
        (None, None)
    };

    Diagnostics {
        index_error,
        f_error,
        p_error,
        r_error,
    }
}

/// Per-step value of the oracle LP solution under `accounting`.
pub fn oracle_value(world: &WorldModel, accounting: RewardAccounting) -> Result<f64> {
    let rewards: Vec<f64> = world
        .arms()
        .iter()
        .flat_map(|a| a.rewards.iter().copied())
        .collect();
    let sol = solve_lp(&build_exact_lp(world, &rewards)?).into_optimal()?;
    Ok(match accounting {
        RewardAccounting::AllArms => sol.objective_value,
        RewardAccounting::ActiveOnly => (0..world.n_arms())
            .flat_map(|n| (0..world.n_states()).map(move |s| (n, s)))
            .map(|(n, s)| sol.mass(n, s, Action::Active) * world.reward(n, s))
            .sum(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    /// Per-episode benchmark reward.
    pub benchmark: Vec<f64>,
    pub per_episode: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// Log-log slope of cumulative regret over the second half; `None` when
    /// regret never exceeds one there.
    pub slope: Option<f64>,
}

/// Regret of `logs` against the configured benchmark on `env`.
pub fn compute_regret(
    logs: &[EpisodeLog],
    env: &EnvSpec,
    cfg: &ExperimentConfig,
) -> Result<RegretReport> {
    let benchmark = match cfg.benchmark {
        Benchmark::LpValue => {
            let world = env.build(cfg.seed, cfg.budget)?;
            let value = cfg.horizon as f64 * oracle_value(&world, cfg.accounting)?;
            vec![value; logs.len()]
        }
        Benchmark::OracleRollout => {
            let mut oracle_cfg = cfg.clone();
            oracle_cfg.episodes = logs.len();
            oracle_cfg.diagnostics = false;
            run_experiment(env, PolicyKind::Oracle, &oracle_cfg)?
                .logs
                .iter()
                .map(|l| l.episodic_reward)
                .collect()
        }
    };
    Ok(regret_against(logs, &benchmark))
}

pub fn regret_against(logs: &[EpisodeLog], benchmark: &[f64]) -> RegretReport {
    let per_episode: Vec<f64> = logs
        .iter()
        .zip(benchmark)
        .map(|(l, b)| b - l.episodic_reward)
        .collect();
    let cumulative: Vec<f64> = per_episode
        .iter()
        .scan(0.0, |acc, r| {
            *acc += r;
            Some(*acc)
        })
        .collect();
    RegretReport {
        benchmark: benchmark[..per_episode.len()].to_vec(),
        slope: loglog_slope(&cumulative),
        per_episode,
        cumulative,
    }
}

/// Least-squares slope of `ln max(c_t, 1)` on `ln t` over the second half of
/// the series (`t` is 1-based).
pub fn loglog_slope(cumulative: &[f64]) -> Option<f64> {
    let k = cumulative.len();
    let start = k / 2;
    if k - start < 2 || cumulative[start..].iter().all(|&c| c <= 1.0) {
        return None;
    }
    let pts: Vec<(f64, f64)> = (start..k)
        .map(|i| (((i + 1) as f64).ln(), cumulative[i].max(1.0).ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// One finished replication.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub run: RunOutput,
    pub report: RegretReport,
    pub wall_clock_secs: f64,
}

/// Runs and scores one seed.
pub fn replicate(env: &EnvSpec, kind: PolicyKind, cfg: &ExperimentConfig) -> Result<Replication> {
    let start = std::time::Instant::now();
    let run = run_experiment(env, kind, cfg)?;
    let report = compute_regret(&run.logs, env, cfg)?;
    Ok(Replication {
        run,
        report,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

/// Runs every seed concurrently; results come back in `seeds` order.
pub fn run_sweep(
    env: &EnvSpec,
    kind: PolicyKind,
    cfg: &ExperimentConfig,
    seeds: &[u64],
) -> Result<Vec<Replication>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut c = cfg.clone();
            c.seed = seed;
            replicate(env, kind, &c)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(episode: usize, reward: f64) -> EpisodeLog {
        EpisodeLog {
            episode,
            episodic_reward: reward,
            activations: vec![],
            duels: 0,
            diagnostics: Diagnostics::default(),
        }
    }

    #[test]
    fn zero_regret_has_no_slope() {
        let logs: Vec<_> = (1..=50).map(|k| log(k, 7.0)).collect();
        let rep = regret_against(&logs, &[7.0; 50]);
        assert!(rep.cumulative.iter().all(|&c| c == 0.0));
        assert_eq!(rep.slope, None);
    }

    #[test]
    fn slope_recovers_known_exponents() {
        let sqrt: Vec<f64> = (1..=400).map(|t| 30.0 * (t as f64).sqrt()).collect();
        assert!((loglog_slope(&sqrt).unwrap() - 0.5).abs() < 0.02);
        let lin: Vec<f64> = (1..=400).map(|t| 3.0 * t as f64).collect();
        assert!((loglog_slope(&lin).unwrap() - 1.0).abs() < 0.02);
    }

    #[test]
    fn cumulative_is_prefix_sum() {
        let logs = vec![log(1, 1.0), log(2, 3.0), log(3, 2.5)];
        let rep = regret_against(&logs, &[2.0; 3]);
        assert_eq!(rep.per_episode, vec![1.0, -1.0, -0.5]);
        assert_eq!(rep.cumulative, vec![1.0, 0.0, -0.5]);
    }

    #[test]
    fn presets_follow_published_tables() {
        let c = ExperimentConfig::preset(Environment::Cpap, Preset::Full);
        assert_eq!((c.episodes, c.horizon, c.epsilon), (300, 1000, 1e-5));
        let a = ExperimentConfig::preset(Environment::AppMarketing, Preset::Full);
        assert_eq!((a.episodes, a.horizon), (4000, 100));
        let m = ExperimentConfig::preset(Environment::Armman, Preset::Full);
        assert_eq!((m.episodes, m.horizon), (20_000, 5));
        assert_eq!(
            ExperimentConfig::preset(Environment::Cpap, Preset::Desk).episodes,
            75
        );
    }

    #[test]
    fn budget_override_and_invalid_config() {
        let w = EnvSpec::AppMarketing.build(0, Some(2)).unwrap();
        assert_eq!(w.budget(), 2);
        let mut c = ExperimentConfig::preset(Environment::AppMarketing, Preset::Desk);
        c.epsilon = 2.0;
        assert!(run_experiment(&EnvSpec::AppMarketing, PolicyKind::Random, &c).is_err());
        assert!(EnvSpec::standard(Environment::Custom).is_err());
    }

    #[test]
    fn small_run_counts_duels_and_activations() {
        let mut c = ExperimentConfig::preset(Environment::AppMarketing, Preset::Desk);
        c.episodes = 3;
        c.horizon = 20;
        let out = run_experiment(&EnvSpec::AppMarketing, PolicyKind::Dopl, &c).unwrap();
        assert_eq!(out.logs.len(), 3);
        for l in &out.logs {
            assert_eq!(l.duels, 20 * 3);
            assert_eq!(l.activations.iter().sum::<u64>(), 20 * 4);
            assert!(l.diagnostics.index_error.is_some());
        }
        let r = run_experiment(&EnvSpec::AppMarketing, PolicyKind::Random, &c).unwrap();
        assert!(r
            .logs
            .iter()
            .all(|l| l.duels == 0 && l.diagnostics.f_error.is_none()));
    }

    #[test]
    fn active_only_value_is_at_most_all_arms() {
        let w = build_cpap(CpapMix::default()).unwrap();
        let all = oracle_value(&w, RewardAccounting::AllArms).unwrap();
        let act = oracle_value(&w, RewardAccounting::ActiveOnly).unwrap();
        assert!(act <= all + 1e-9 && act > 0.0);
    }
}
