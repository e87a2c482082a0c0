//! Seed sweeps comparing filter-based and random warm starts.

use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use crate::artifacts::{list_files, RunDir};
use crate::config::{PipelineConfig, WarmStartSource};
use crate::error::{CliError, CliResult};
use crate::pipeline::{run_pipeline, status_label, with_threads, CONFIG_FILE};

pub const RUNS_FILE: &str = "runs.csv";
pub const SERIES_FILE: &str = "series.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const RUNS_CSV_HEADER: &str = "seed,method,status,converged,iterations,final_objective,final_violation,time_s,error";
pub const SERIES_CSV_HEADER: &str = "method,iter,runs,objective_median,objective_q25,objective_q75";
pub const SUMMARY_CSV_HEADER: &str = "method,runs,converged,not_converged,failed,objective_median,objective_q25,objective_q75,violation_median,time_median_s";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Method {
    /// Prox-linear from the filter, cluster and select warm start.
    ProxFw,
    /// Prox-linear from a random input rollout.
    ProxRandom,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::ProxFw, Method::ProxRandom];

    pub fn name(self) -> &'static str {
        match self {
            Method::ProxFw => "prox-FW",
            Method::ProxRandom => "prox-random",
        }
    }

    fn warm_start(self) -> WarmStartSource {
        match self {
            Method::ProxFw => WarmStartSource::Filter,
            Method::ProxRandom => WarmStartSource::Random,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunRow {
    pub seed: u64,
    pub method: Method,
    pub status: String,
    pub converged: bool,
    pub iterations: usize,
    pub final_objective: f64,
    pub final_violation: f64,
    pub time_s: f64,
    pub error: Option<String>,
    /// Objective after each prox-linear iteration.
    #[serde(skip)]
    pub objective_log: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeriesRow {
    pub method: Method,
    pub iter: usize,
    pub runs: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub runs: usize,
    pub converged: usize,
    pub not_converged: usize,
    pub failed: usize,
    pub objective: [f64; 3],
    pub violation_median: f64,
    pub time_median_s: f64,
}

pub struct MonteCarloReport {
    pub rows: Vec<RunRow>,
    pub series: Vec<SeriesRow>,
    pub summary: Vec<SummaryRow>,
}

impl MonteCarloReport {
    pub fn summary_for(&self, method: Method) -> &SummaryRow {
        self.summary.iter().find(|s| s.method == method).expect("every method is summarized")
    }
}

/// Linearly interpolated quantile of sorted data (`p` in `[0, 1]`).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Per-iteration objective quartiles. A run that stopped early keeps
/// contributing its last objective.
pub fn objective_series(rows: &[RunRow], method: Method) -> Vec<SeriesRow> {
    let logs: Vec<&Vec<f64>> = rows
        .iter()
        .filter(|r| r.method == method && !r.objective_log.is_empty())
        .map(|r| &r.objective_log)
        .collect();
    let len = logs.iter().map(|l| l.len()).max().unwrap_or(0);
    (0..len)
        .map(|i| {
            let vals = sorted(logs.iter().map(|l| l[i.min(l.len() - 1)]).collect());
            SeriesRow {
                method,
                iter: i + 1,
                runs: logs.iter().filter(|l| l.len() > i).count(),
                median: quantile(&vals, 0.5),
                q25: quantile(&vals, 0.25),
                q75: quantile(&vals, 0.75),
            }
        })
        .collect()
}

pub fn summarize(rows: &[RunRow], method: Method) -> SummaryRow {
    let mine: Vec<&RunRow> = rows.iter().filter(|r| r.method == method).collect();
    let ok: Vec<&&RunRow> = mine.iter().filter(|r| r.error.is_none()).collect();
    let q = |v: Vec<f64>, p: f64| if v.is_empty() { f64::NAN } else { quantile(&sorted(v), p) };
    let objectives: Vec<f64> = ok.iter().map(|r| r.final_objective).collect();
    SummaryRow {
        method,
        runs: mine.len(),
        converged: mine.iter().filter(|r| r.converged).count(),
        not_converged: mine.iter().filter(|r| !r.converged).count(),
        failed: mine.len() - ok.len(),
        objective: [
            q(objectives.clone(), 0.5),
            q(objectives.clone(), 0.25),
            q(objectives, 0.75),
        ],
        violation_median: q(ok.iter().map(|r| r.final_violation).collect(), 0.5),
        time_median_s: q(ok.iter().map(|r| r.time_s).collect(), 0.5),
    }
}

pub fn runs_csv(rows: &[RunRow]) -> String {
    let mut s = format!("{RUNS_CSV_HEADER}\n");
    for r in rows {
        let err = r.error.as_deref().unwrap_or("").replace(['"', '\n'], " ");
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:e},{:e},{:.6},\"{}\"",
            r.seed,
            r.method.name(),
            r.status,
            r.converged,
            r.iterations,
            r.final_objective,
            r.final_violation,
            r.time_s,
            err
        );
    }
    s
}

pub fn series_csv(series: &[SeriesRow]) -> String {
    let mut s = format!("{SERIES_CSV_HEADER}\n");
    for r in series {
        let _ = writeln!(s, "{},{},{},{:e},{:e},{:e}", r.method.name(), r.iter, r.runs, r.median, r.q25, r.q75);
    }
    s
}

pub fn summary_csv(summary: &[SummaryRow]) -> String {
    let mut s = format!("{SUMMARY_CSV_HEADER}\n");
    for r in summary {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:e},{:e},{:e},{:e},{:.6}",
            r.method.name(),
            r.runs,
            r.converged,
            r.not_converged,
            r.failed,
            r.objective[0],
            r.objective[1],
            r.objective[2],
            r.violation_median,
            r.time_median_s
        );
    }
    s
}

fn run_one(base: &PipelineConfig, seed: u64, method: Method) -> RunRow {
    let mut cfg = base.clone();
    cfg.filter.seed = seed;
    cfg.warm_start = method.warm_start();
    cfg.threads = None;
    cfg.output_dir = base.output_dir.join("runs").join(format!("seed-{seed}-{}", method.name()));
    match run_pipeline(cfg) {
        Ok(report) => {
            let solve = report.solve.as_ref().expect("pipeline always solves");
            RunRow {
                seed,
                method,
                status: status_label(&solve.outcome.status),
                converged: solve.outcome.status.is_converged(),
                iterations: solve.outcome.log.len(),
                final_objective: solve.final_objective,
                final_violation: solve.final_violation,
                time_s: report.elapsed_s,
                error: None,
                objective_log: solve.outcome.log.entries.iter().map(|e| e.objective).collect(),
            }
        }
        Err(e) => RunRow {
            seed,
            method,
            status: "failed".into(),
            converged: false,
            iterations: 0,
            final_objective: f64::NAN,
            final_violation: f64::NAN,
            time_s: 0.0,
            error: Some(e.to_string()),
            objective_log: Vec::new(),
        },
    }
}

/// Runs the pipeline for every (seed, method) pair on the configured pool and
/// writes the per-run, per-iteration and summary tables. Individual failures
/// are recorded as rows; only configuration problems abort the sweep.
pub fn run_montecarlo(config: PipelineConfig, seeds: &[u64]) -> CliResult<MonteCarloReport> {
    if seeds.is_empty() {
        return Err(CliError::Config("montecarlo needs at least one seed".into()));
    }
    // Surface config errors once instead of once per run.
    let scenario = config.load_scenario()?;
    let problem = proxwarm_core::build_benchmark(&scenario).map_err(|e| CliError::Config(format!("scenario: {e}")))?;
    config.validate(problem.nx() + problem.nu())?;

    let jobs: Vec<(u64, Method)> = seeds.iter().flat_map(|&s| Method::ALL.map(|m| (s, m))).collect();
    let rows: Vec<RunRow> =
        with_threads(config.threads, || jobs.par_iter().map(|&(s, m)| run_one(&config, s, m)).collect())?;

    let series: Vec<SeriesRow> = Method::ALL.iter().flat_map(|&m| objective_series(&rows, m)).collect();
    let summary: Vec<SummaryRow> = Method::ALL.iter().map(|&m| summarize(&rows, m)).collect();

    let mut dir = RunDir::create(&config.output_dir)?;
    dir.manifest.commands.push("montecarlo".into());
    dir.manifest.config_hash = config.hash();
    dir.manifest.notes.push(format!("seeds: {seeds:?}"));
    dir.write(CONFIG_FILE, config.to_json())?;
    dir.write(RUNS_FILE, runs_csv(&rows))?;
    dir.write(SERIES_FILE, series_csv(&series))?;
    dir.write(SUMMARY_FILE, summary_csv(&summary))?;
    let runs_root: PathBuf = dir.path("runs");
    if runs_root.is_dir() {
        for rel in list_files(&runs_root).map_err(|e| CliError::stage("output", e))? {
            dir.record_existing(&format!("runs/{rel}"))?;
        }
    }
    dir.manifest.status = "completed".into();
    dir.finish()?;
    Ok(MonteCarloReport { rows, series, summary })
}
