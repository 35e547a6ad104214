//! `prefbandit` command-line runner.
//!
//! ```text
//! prefbandit run --env cpap --policy dopl --preset desk --seed 3
//! prefbandit sweep --env app-marketing --policy random --seeds 0..5
//! prefbandit regret-fit out/cpap_dopl_seed3.csv
//! ```
//!
//! `PREFBANDIT_OUT` sets the output directory when `--out` is absent.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use prefbandit::harness::{
    compute_regret, emit_outputs, loglog_slope, read_cumulative_regret, run_experiment,
    run_experiment_observed, run_sweep, write_aggregate_csv, Benchmark, EnvSpec, ExperimentConfig,
    Observer, Preset, Replication, RewardAccounting,
};
use prefbandit::policies::{Internals, PolicyKind};
use prefbandit::world::{Environment, WorldConfig};

#[derive(Parser, Debug)]
#[command(
    name = "prefbandit",
    version,
    about = "Restless bandits with preference feedback"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one policy on one seed and write CSV + JSON manifest.
    Run {
        #[command(flatten)]
        exp: ExpArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the policy's reference-column estimate per episode as JSON lines.
        #[arg(long)]
        dump_reference: Option<PathBuf>,
    },
    /// Run one policy over several seeds in parallel; adds an aggregate CSV.
    Sweep {
        #[command(flatten)]
        exp: ExpArgs,
        /// Comma list (`0,1,4`) or half-open range (`0..5`).
        #[arg(long, default_value = "0..5")]
        seeds: String,
    },
    /// Fit the log-log slope of cumulative regret in an output CSV.
    RegretFit { csv: PathBuf },
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum EnvArg {
    AppMarketing,
    Cpap,
    Armman,
    Custom,
}

impl From<EnvArg> for Environment {
    fn from(e: EnvArg) -> Self {
        match e {
            EnvArg::AppMarketing => Environment::AppMarketing,
            EnvArg::Cpap => Environment::Cpap,
            EnvArg::Armman => Environment::Armman,
            EnvArg::Custom => Environment::Custom,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum PolicyArg {
    Dopl,
    Oracle,
    Random,
    MleLp,
}

impl From<PolicyArg> for PolicyKind {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Dopl => PolicyKind::Dopl,
            PolicyArg::Oracle => PolicyKind::Oracle,
            PolicyArg::Random => PolicyKind::Random,
            PolicyArg::MleLp => PolicyKind::MleLp,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum PresetArg {
    Full,
    Desk,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum AccountingArg {
    AllArms,
    ActiveOnly,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum BenchmarkArg {
    LpValue,
    OracleRollout,
}

#[derive(Args, Debug)]
struct ExpArgs {
    #[arg(long, value_enum)]
    env: EnvArg,
    #[arg(long, value_enum, default_value = "dopl")]
    policy: PolicyArg,
    #[arg(long, value_enum, default_value = "desk")]
    preset: PresetArg,
    /// World description (TOML or JSON) for `--env custom`.
    #[arg(long)]
    world: Option<PathBuf>,
    /// Number of episodes K.
    #[arg(short = 'k', long)]
    episodes: Option<usize>,
    /// Steps per episode H.
    #[arg(long)]
    horizon: Option<usize>,
    /// Confidence parameter for the transition and preference widths.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Activation budget B.
    #[arg(short = 'b', long)]
    budget: Option<usize>,
    /// Reference entry as `ARM:STATE`.
    #[arg(long, default_value = "0:0", value_parser = parse_entry)]
    reference: (usize, usize),
    #[arg(long, value_enum, default_value = "all-arms")]
    accounting: AccountingArg,
    #[arg(long, value_enum, default_value = "lp-value")]
    benchmark: BenchmarkArg,
    /// Skip the per-episode estimation-error columns.
    #[arg(long)]
    no_diagnostics: bool,
    #[arg(long, env = "PREFBANDIT_OUT", default_value = "out")]
    out: PathBuf,
}

fn parse_entry(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or("expected ARM:STATE")?;
    Ok((
        a.trim().parse().map_err(|e| format!("arm: {e}"))?,
        b.trim().parse().map_err(|e| format!("state: {e}"))?,
    ))
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        if a >= b {
            bail!("empty seed range {s}");
        }
        return Ok((a..b).collect());
    }
    s.split(',').map(|x| Ok(x.trim().parse()?)).collect()
}

impl ExpArgs {
    fn spec(&self) -> Result<EnvSpec> {
        let env: Environment = self.env.into();
        match (env, &self.world) {
            (Environment::Custom, Some(path)) => Ok(EnvSpec::Custom(WorldConfig::load(path)?)),
            (Environment::Custom, None) => bail!("--env custom needs --world FILE"),
            (_, Some(_)) => bail!("--world only applies to --env custom"),
            (env, None) => Ok(EnvSpec::standard(env)?),
        }
    }

    fn config(&self, seed: u64) -> ExperimentConfig {
        let preset = match self.preset {
            PresetArg::Full => Preset::Full,
            PresetArg::Desk => Preset::Desk,
        };
        let mut c = ExperimentConfig::preset(self.env.into(), preset);
        if let Some(k) = self.episodes {
            c.episodes = k;
        }
        if let Some(h) = self.horizon {
            c.horizon = h;
        }
        if let Some(e) = self.epsilon {
            c.epsilon = e;
        }
        c.budget = self.budget;
        c.seed = seed;
        c.reference = self.reference;
        c.accounting = match self.accounting {
            AccountingArg::AllArms => RewardAccounting::AllArms,
            AccountingArg::ActiveOnly => RewardAccounting::ActiveOnly,
        };
        c.benchmark = match self.benchmark {
            BenchmarkArg::LpValue => Benchmark::LpValue,
            BenchmarkArg::OracleRollout => Benchmark::OracleRollout,
        };
        c.diagnostics = !self.no_diagnostics;
        c
    }
}

fn summary(rep: &Replication, csv: &Path) -> String {
    let slope = rep
        .report
        .slope
        .map_or("n/a".to_string(), |s| format!("{s:.4}"));
    format!(
        "{} seed {}: final cumulative regret {:.3}, slope {slope}, csv {}",
        rep.run.policy.name(),
        rep.run.config.seed,
        rep.report.cumulative.last().copied().unwrap_or(0.0),
        csv.display()
    )
}

/// Streams the reference-column estimate to a JSON-lines file.
struct ReferenceDump {
    out: BufWriter<File>,
    error: Option<std::io::Error>,
}

impl Observer for ReferenceDump {
    fn on_episode_start(&mut self, episode: usize, internals: Internals<'_>) {
        if self.error.is_some() {
            return;
        }
        let Some(p) = internals.preference else {
            return;
        };
        let line = serde_json::json!({ "episode": episode, "estimate": p });
        if let Err(e) = writeln!(self.out, "{line}") {
            self.error = Some(e);
        }
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run {
            exp,
            seed,
            dump_reference,
        } => {
            let spec = exp.spec()?;
            let cfg = exp.config(seed);
            let kind: PolicyKind = exp.policy.into();
            info!(
                "running {} on {} with {cfg:?}",
                kind.name(),
                spec.environment().name()
            );
            let start = std::time::Instant::now();
            let run = match &dump_reference {
                Some(dump) => {
                    let file = File::create(dump)
                        .with_context(|| format!("creating {}", dump.display()))?;
                    let mut obs = ReferenceDump {
                        out: BufWriter::new(file),
                        error: None,
                    };
                    let run = run_experiment_observed(&spec, kind, &cfg, &mut obs)?;
                    if let Some(e) = obs.error {
                        return Err(e).with_context(|| format!("writing {}", dump.display()));
                    }
                    obs.out
                        .flush()
                        .with_context(|| format!("writing {}", dump.display()))?;
                    run
                }
                None => run_experiment(&spec, kind, &cfg)?,
            };
            let report = compute_regret(&run.logs, &spec, &cfg)?;
            let rep = Replication {
                run,
                report,
                wall_clock_secs: start.elapsed().as_secs_f64(),
            };
            let (csv, _) = emit_outputs(&exp.out, &rep)?;
            println!("{}", summary(&rep, &csv));
        }
        Command::Sweep { exp, seeds } => {
            let spec = exp.spec()?;
            let seeds = parse_seeds(&seeds)?;
            let kind: PolicyKind = exp.policy.into();
            let reps = run_sweep(&spec, kind, &exp.config(0), &seeds)?;
            for rep in &reps {
                let (csv, _) = emit_outputs(&exp.out, rep)?;
                println!("{}", summary(rep, &csv));
            }
            let agg = exp.out.join(format!(
                "{}_{}_aggregate.csv",
                spec.environment().name(),
                kind.name()
            ));
            write_aggregate_csv(&agg, &reps)?;
            println!("aggregate over {} seeds: {}", reps.len(), agg.display());
        }
        Command::RegretFit { csv } => {
            let cum = read_cumulative_regret(&csv)?;
            match loglog_slope(&cum) {
                Some(s) => println!(
                    "episodes {}, final cumulative regret {}, slope {s:.4}",
                    cum.len(),
                    cum.last().copied().unwrap_or(0.0)
                ),
                None => println!(
                    "episodes {}, slope n/a (cumulative regret never exceeds 1 in the second half)",
                    cum.len()
                ),
            }
        }
    }
    Ok(())
}
