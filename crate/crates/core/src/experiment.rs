//! Sweep execution, per-run seeding and CSV output.

use std::io::Write;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use crate::config::{ConfigError, ExperimentSpec};
use crate::engine::mix64;
use crate::metrics::RunMetrics;
use crate::sim::{simulate, SimConfig};
use crate::stats;

/// CSV columns of the per-run file, in order.
pub const RUN_COLUMNS: [&str; 15] = [
    "seed",
    "mac_variant",
    "slot_size_s",
    "retx_delay_s",
    "retx_limit",
    "reliability",
    "mean_latency_s",
    "p95_latency_s",
    "delivered",
    "generated",
    "collisions",
    "arq_discards",
    "queue_drops",
    "mean_daily_energy_mwh",
    "max_daily_energy_mwh",
];

/// Seed of replication `rep` at sweep point `point`.
pub fn run_seed(base_seed: u64, point: usize, rep: usize) -> u64 {
    base_seed ^ mix64(((point as u64) << 32) ^ rep as u64 ^ 0x5eed_0000_0000_0000)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Uses the rayon pool when built with the `parallel` feature, otherwise
    /// runs sequentially.
    Parallel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub point: usize,
    pub replication: usize,
    pub seed: u64,
    pub config: SimConfig,
    pub metrics: RunMetrics,
}

#[derive(Debug)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("run failed (point {point}, replication {replication}, seed {seed}): {message}")]
    RunFailed {
        point: usize,
        replication: usize,
        seed: u64,
        message: String,
    },
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

struct Job {
    point: usize,
    replication: usize,
    seed: u64,
    config: SimConfig,
}

fn execute(job: Job) -> Result<RunRecord, ExperimentError> {
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| simulate(&job.config, job.seed)));
    let failed = |message: String| ExperimentError::RunFailed {
        point: job.point,
        replication: job.replication,
        seed: job.seed,
        message,
    };
    match outcome {
        Ok(Ok(metrics)) => Ok(RunRecord {
            point: job.point,
            replication: job.replication,
            seed: job.seed,
            config: job.config,
            metrics,
        }),
        Ok(Err(e)) => Err(failed(e.to_string())),
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            Err(failed(format!("panicked: {msg}")))
        }
    }
}

#[cfg(feature = "parallel")]
fn execute_all(jobs: Vec<Job>, mode: Execution) -> Vec<Result<RunRecord, ExperimentError>> {
    use rayon::prelude::*;
    match mode {
        Execution::Sequential => jobs.into_iter().map(execute).collect(),
        Execution::Parallel => jobs.into_par_iter().map(execute).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn execute_all(jobs: Vec<Job>, _mode: Execution) -> Vec<Result<RunRecord, ExperimentError>> {
    jobs.into_iter().map(execute).collect()
}

/// Runs every (point, replication) pair. Rows come back in point-major order
/// whatever the execution mode.
pub fn run_experiment_with(
    spec: &ExperimentSpec,
    mode: Execution,
) -> Result<ExperimentResult, ExperimentError> {
    spec.validate()?;
    let mut jobs = Vec::with_capacity(spec.n_points() * spec.replications);
    for point in 0..spec.n_points() {
        let config = spec.point_config(point)?;
        for replication in 0..spec.replications {
            jobs.push(Job {
                point,
                replication,
                seed: run_seed(spec.base_seed, point, replication),
                config: config.clone(),
            });
        }
    }
    let runs = execute_all(jobs, mode)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ExperimentResult {
        spec: spec.clone(),
        runs,
    })
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult, ExperimentError> {
    run_experiment_with(spec, Execution::Parallel)
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl ExperimentResult {
    /// Runs of sweep point `point`, in replication order.
    pub fn point_runs(&self, point: usize) -> impl Iterator<Item = &RunRecord> {
        self.runs.iter().filter(move |r| r.point == point)
    }

    /// Values of `f` over replications of `point`, skipping absent ones.
    pub fn point_values<F>(&self, point: usize, f: F) -> Vec<f64>
    where
        F: Fn(&RunMetrics) -> Option<f64>,
    {
        self.point_runs(point)
            .filter_map(|r| f(&r.metrics))
            .collect()
    }

    pub fn write_runs_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(RUN_COLUMNS)?;
        for r in &self.runs {
            let m = &r.metrics;
            let c = &r.config.mac;
            w.write_record([
                r.seed.to_string(),
                c.variant.name().to_string(),
                c.slot_size.to_string(),
                c.retx_delay.to_string(),
                c.retx_limit.to_string(),
                m.reliability.to_string(),
                opt(m.mean_latency),
                opt(m.p95_latency),
                m.delivered_events.to_string(),
                m.generated_events.to_string(),
                m.collisions.to_string(),
                m.arq_discards.to_string(),
                m.queue_drops.to_string(),
                m.mean_daily_energy().to_string(),
                m.max_daily_energy().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Per-point mean and sample standard deviation of every metric column.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        type Column = (&'static str, fn(&RunMetrics) -> Option<f64>);
        let columns: [Column; 10] = [
            ("reliability", |m| Some(m.reliability)),
            ("mean_latency_s", |m| m.mean_latency),
            ("p95_latency_s", |m| m.p95_latency),
            ("delivered", |m| Some(m.delivered_events as f64)),
            ("generated", |m| Some(m.generated_events as f64)),
            ("collisions", |m| Some(m.collisions as f64)),
            ("arq_discards", |m| Some(m.arq_discards as f64)),
            ("queue_drops", |m| Some(m.queue_drops as f64)),
            ("mean_daily_energy_mwh", |m| Some(m.mean_daily_energy())),
            ("max_daily_energy_mwh", |m| Some(m.max_daily_energy())),
        ];
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = vec!["point".into()];
        header.extend(self.spec.sweeps.iter().map(|a| a.key.clone()));
        header.extend(
            [
                "mac_variant",
                "slot_size_s",
                "retx_delay_s",
                "retx_limit",
                "replications",
            ]
            .map(String::from),
        );
        for (name, _) in &columns {
            header.push(format!("{name}_mean"));
            header.push(format!("{name}_std"));
        }
        w.write_record(&header)?;
        for point in 0..self.spec.n_points() {
            let Some(first) = self.point_runs(point).next() else {
                continue;
            };
            let c = &first.config.mac;
            let mut row: Vec<String> = vec![point.to_string()];
            row.extend(
                self.spec
                    .point_assignments(point)
                    .into_iter()
                    .map(|(_, v)| v.to_string()),
            );
            row.extend([
                c.variant.name().to_string(),
                c.slot_size.to_string(),
                c.retx_delay.to_string(),
                c.retx_limit.to_string(),
                self.point_runs(point).count().to_string(),
            ]);
            for (_, f) in &columns {
                let v = self.point_values(point, f);
                row.push(opt(stats::mean(&v)));
                row.push(opt(stats::std_dev(&v)));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `runs.csv` and `summary.csv` into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<(), ExperimentError> {
        let io = |path: &Path, e: std::io::Error| ExperimentError::Io {
            path: path.to_path_buf(),
            source: e,
        };
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        for (name, summary) in [("runs.csv", false), ("summary.csv", true)] {
            let path = dir.join(name);
            let file = std::fs::File::create(&path).map_err(|e| io(&path, e))?;
            let out = std::io::BufWriter::new(file);
            let r = if summary {
                self.write_summary_csv(out)
            } else {
                self.write_runs_csv(out)
            };
            r.map_err(|e| io(&path, e.into()))?;
        }
        Ok(())
    }
}
