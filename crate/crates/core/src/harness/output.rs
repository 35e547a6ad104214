//! CSV and JSON artifacts. Floats are written with Rust's shortest
//! round-trip formatting, so identical runs produce identical bytes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EpisodeLog, Replication, RunOutput};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 7] = [
    "episode",
    "episodic_reward",
    "cumulative_regret",
    "index_error",
    "F_error",
    "P_error",
    "R_error",
];

pub const AGGREGATE_HEADER: [&str; 6] = [
    "episode",
    "episodic_reward_mean",
    "episodic_reward_std",
    "cumulative_regret_mean",
    "cumulative_regret_std",
    "seeds",
];

/// Run metadata stored next to each CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub environment: String,
    pub policy: String,
    pub seed: u64,
    pub fingerprint: String,
    pub n_arms: usize,
    pub n_states: usize,
    pub budget: usize,
    pub config: super::ExperimentConfig,
    /// Per-episode benchmark of the first episode.
    pub benchmark_per_episode: Option<f64>,
    pub final_cumulative_regret: Option<f64>,
    pub regret_slope: Option<f64>,
    pub csv: String,
    pub wall_clock_secs: f64,
    pub finished_unix_secs: u64,
}

impl Manifest {
    pub fn new(rep: &Replication, csv: &Path) -> Self {
        let run = &rep.run;
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            environment: run.environment.name().to_string(),
            policy: run.policy.name().to_string(),
            seed: run.config.seed,
            fingerprint: run.fingerprint.clone(),
            n_arms: run.n_arms,
            n_states: run.n_states,
            budget: run.budget,
            config: run.config.clone(),
            benchmark_per_episode: rep.report.benchmark.first().copied(),
            final_cumulative_regret: rep.report.cumulative.last().copied(),
            regret_slope: rep.report.slope,
            csv: csv
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default(),
            wall_clock_secs: rep.wall_clock_secs,
            finished_unix_secs: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, format!("{other:?}")),
    }
}

/// Writes the per-episode CSV of one run.
pub fn write_run_csv(path: &Path, logs: &[EpisodeLog], cumulative: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(CSV_HEADER).map_err(|e| csv_err(path, e))?;
    for (log, cum) in logs.iter().zip(cumulative) {
        let d = &log.diagnostics;
        w.write_record([
            log.episode.to_string(),
            log.episodic_reward.to_string(),
            cum.to_string(),
            opt(d.index_error),
            opt(d.f_error),
            opt(d.p_error),
            opt(d.r_error),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// File stem used for a run: `<env>_<policy>_seed<seed>`.
pub fn run_stem(run: &RunOutput) -> String {
    format!(
        "{}_{}_seed{}",
        run.environment.name(),
        run.policy.name(),
        run.config.seed
    )
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`, creating it if needed.
pub fn emit_outputs(dir: &Path, rep: &Replication) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let stem = run_stem(&rep.run);
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    write_run_csv(&csv_path, &rep.run.logs, &rep.report.cumulative)?;
    let manifest = Manifest::new(rep, &csv_path);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::parse(&json_path, e))?;
    std::fs::write(&json_path, text + "\n").map_err(|e| Error::io(&json_path, e))?;
    Ok((csv_path, json_path))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub episode: usize,
    pub reward_mean: f64,
    pub reward_std: f64,
    pub regret_mean: f64,
    pub regret_std: f64,
    pub seeds: usize,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean and sample standard deviation across replications, per episode.
pub fn aggregate_rows(reps: &[Replication]) -> Vec<AggregateRow> {
    let k = reps.iter().map(|r| r.run.logs.len()).min().unwrap_or(0);
    (0..k)
        .map(|i| {
            let rewards: Vec<f64> = reps.iter().map(|r| r.run.logs[i].episodic_reward).collect();
            let regrets: Vec<f64> = reps.iter().map(|r| r.report.cumulative[i]).collect();
            let (reward_mean, reward_std) = mean_std(&rewards);
            let (regret_mean, regret_std) = mean_std(&regrets);
            AggregateRow {
                episode: i + 1,
                reward_mean,
                reward_std,
                regret_mean,
                regret_std,
                seeds: reps.len(),
            }
        })
        .collect()
}

pub fn write_aggregate_csv(path: &Path, reps: &[Replication]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(AGGREGATE_HEADER)
        .map_err(|e| csv_err(path, e))?;
    for row in aggregate_rows(reps) {
        w.write_record([
            row.episode.to_string(),
            row.reward_mean.to_string(),
            row.reward_std.to_string(),
            row.regret_mean.to_string(),
            row.regret_std.to_string(),
            row.seeds.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads the cumulative-regret column of a run CSV, or the regret mean of an
/// aggregate CSV.
pub fn read_cumulative_regret(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let col = headers
        .iter()
        .position(|h| h == "cumulative_regret" || h == "cumulative_regret_mean")
        .ok_or_else(|| Error::parse(path, "no cumulative regret column"))?;
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            rec[col].parse::<f64>().map_err(|e| {
                Error::parse(
                    path,
                    format!("line {:?}: {e}", rec.position().map(|p| p.line())),
                )
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::Diagnostics;

    #[test]
    fn header_and_blank_diagnostics() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.csv");
        let logs = vec![EpisodeLog {
            episode: 1,
            episodic_reward: 2.5,
            activations: vec![],
            duels: 0,
            diagnostics: Diagnostics {
                index_error: Some(0.25),
                ..Diagnostics::default()
            },
        }];
        write_run_csv(&path, &logs, &[0.5]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "episode,episodic_reward,cumulative_regret,index_error,F_error,P_error,R_error"
        );
        assert_eq!(lines.next().unwrap(), "1,2.5,0.5,0.25,,,");
        assert_eq!(read_cumulative_regret(&path).unwrap(), vec![0.5]);
    }

    #[test]
    fn mean_and_sample_std() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 2f64.sqrt()));
        assert_eq!(mean_std(&[4.0]), (4.0, 0.0));
    }

    #[test]
    fn missing_file_reports_path() {
        let err = read_cumulative_regret(Path::new("/nonexistent/x.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.csv"));
    }
}
