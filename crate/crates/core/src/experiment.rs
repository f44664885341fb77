//! Experiment harness: algorithms × environments × replications, with CSV,
//! JSON summary and comparison-table output.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::clusterrep::{replication_plan, ClusterConfig, ClusterError, ReplicationPlan};
use crate::faults::{build_trace, Environment, EnvironmentProfile, FaultError};
use crate::ingest::{default_resources, generate, parse_any, GeneratorConfig, IngestError, WorkflowSpec};
use crate::metrics::{aggregate, compute, MetricsError, RunMetrics, Summary, HORIZON_FACTOR};
use crate::scheduler::{overprovision, Schedule};
use crate::simruntime::{simulate, CheckpointConfig, SimConfig, SimError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("unknown algorithm `{0}` (expected heft, crch or replicate-all:K)")]
    UnknownAlgorithm(String),
    #[error("replicate-all needs K >= 1")]
    ReplicaCount,
    #[error("replications must be at least 1")]
    Reps,
    #[error("compare needs at least two algorithms")]
    CompareShape,
    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Fault(#[from] FaultError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Heft,
    Crch,
    /// K extra copies of every task.
    ReplicateAll(usize),
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::Heft => f.write_str("heft"),
            Algorithm::Crch => f.write_str("crch"),
            Algorithm::ReplicateAll(k) => write!(f, "replicate-all:{k}"),
        }
    }
}

impl FromStr for Algorithm {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "heft" => return Ok(Algorithm::Heft),
            "crch" => return Ok(Algorithm::Crch),
            _ => {}
        }
        let k = lower
            .strip_prefix("replicate-all:")
            .or_else(|| lower.strip_prefix("replicateall:"))
            .ok_or_else(|| ExperimentError::UnknownAlgorithm(s.to_string()))?;
        let k: usize = k.parse().map_err(|_| ExperimentError::UnknownAlgorithm(s.to_string()))?;
        if k == 0 {
            return Err(ExperimentError::ReplicaCount);
        }
        Ok(Algorithm::ReplicateAll(k))
    }
}

impl Algorithm {
    pub fn plan(&self, spec: &WorkflowSpec, clustering: &ClusterConfig) -> Result<ReplicationPlan, ExperimentError> {
        let n = spec.workflow.len();
        Ok(match self {
            Algorithm::Heft => ReplicationPlan::all_ones(n),
            Algorithm::ReplicateAll(k) => ReplicationPlan::uniform(n, k + 1),
            Algorithm::Crch => replication_plan(spec, clustering)?,
        })
    }

    /// Only the checkpointing algorithm resubmits failed tasks.
    pub fn resubmits(&self) -> bool {
        matches!(self, Algorithm::Crch)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WorkflowSource {
    /// A native JSON document or a DAX file (the latter gets seeded default VMs).
    File(PathBuf),
    Generate(GeneratorConfig),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaChoice {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: WorkflowSource,
    /// VM count and reliable count for DAX inputs.
    pub vms: usize,
    pub reliable: usize,
    pub environments: Vec<Environment>,
    pub algorithms: Vec<Algorithm>,
    pub reps: usize,
    pub seed: u64,
    pub lambda: LambdaChoice,
    pub gamma: f64,
    pub clustering: ClusterConfig,
    /// Where `write_reports` puts its files; nothing is written when unset.
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.reps == 0 {
            return Err(ExperimentError::Reps);
        }
        if self.algorithms.contains(&Algorithm::ReplicateAll(0)) {
            return Err(ExperimentError::ReplicaCount);
        }
        Ok(())
    }

    pub fn checkpoint(&self, profile: &EnvironmentProfile) -> Result<CheckpointConfig, SimError> {
        match self.lambda {
            LambdaChoice::Auto => CheckpointConfig::auto(profile, self.gamma),
            LambdaChoice::Fixed(l) => CheckpointConfig::fixed(l, self.gamma),
        }
    }
}

pub fn load_workflow(cfg: &ExperimentConfig) -> Result<WorkflowSpec, ExperimentError> {
    match &cfg.source {
        WorkflowSource::Generate(g) => Ok(generate(g)),
        WorkflowSource::File(path) => {
            let bytes = read(path)?;
            let mut spec = parse_any(&bytes, &default_resources(cfg.vms, cfg.reliable, cfg.seed))?;
            if spec.metadata.name.is_empty() {
                spec.metadata.name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
            }
            Ok(spec)
        }
    }
}

pub fn read(path: &Path) -> Result<Vec<u8>, ExperimentError> {
    std::fs::read(path).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub algorithm: String,
    pub environment: Environment,
    pub rep: usize,
    pub seed: u64,
    pub metrics: RunMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub environment: Environment,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub workflow: String,
    pub family: String,
    pub size: usize,
    pub seed: u64,
    pub horizon: f64,
    pub runs: Vec<RunRow>,
    pub summaries: Vec<SummaryRow>,
}

/// Per-replication seed.
pub fn rep_seed(base: u64, rep: usize) -> u64 {
    base ^ rep as u64
}

/// Runs every (algorithm, environment, replication) cell. All algorithms in
/// a replication see the same failure trace.
pub fn run(cfg: &ExperimentConfig) -> Result<Report, ExperimentError> {
    cfg.validate()?;
    let spec = load_workflow(cfg)?;
    run_on(cfg, &spec)
}

pub fn run_on(cfg: &ExperimentConfig, spec: &WorkflowSpec) -> Result<Report, ExperimentError> {
    cfg.validate()?;
    let schedules: Vec<(Algorithm, Schedule)> = cfg
        .algorithms
        .iter()
        .map(|a| Ok((*a, overprovision(spec, &a.plan(spec, &cfg.clustering)?))))
        .collect::<Result<_, ExperimentError>>()?;
    let makespan = schedules.iter().map(|(_, s)| s.tet_perfect()).fold(0.0, f64::max);
    let horizon = HORIZON_FACTOR * makespan.max(1.0);

    let mut cells = Vec::new();
    for (ai, _) in schedules.iter().enumerate() {
        for &env in &cfg.environments {
            for rep in 0..cfg.reps {
                cells.push((ai, env, rep));
            }
        }
    }
    let runs = cells
        .par_iter()
        .map(|&(ai, env, rep)| {
            let (alg, s) = &schedules[ai];
            let profile = EnvironmentProfile::defaults(env);
            let seed = rep_seed(cfg.seed, rep);
            let trace = build_trace(&profile, &spec.pool, horizon, seed)?;
            let sim = SimConfig::new(cfg.checkpoint(&profile)?, &profile, alg.resubmits());
            let log = simulate(s, &trace, &sim, spec)?;
            Ok(RunRow {
                algorithm: alg.to_string(),
                environment: env,
                rep,
                seed,
                metrics: compute(&log, s, spec)?,
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;

    let mut summaries = Vec::new();
    for (alg, _) in &schedules {
        for &env in &cfg.environments {
            let name = alg.to_string();
            let cell: Vec<RunMetrics> = runs
                .iter()
                .filter(|r| r.algorithm == name && r.environment == env)
                .map(|r| r.metrics)
                .collect();
            summaries.push(SummaryRow {
                algorithm: name,
                environment: env,
                summary: aggregate(&cell)?,
            });
        }
    }
    Ok(Report {
        workflow: spec.metadata.name.clone(),
        family: spec.metadata.family.clone(),
        size: spec.workflow.len(),
        seed: cfg.seed,
        horizon,
        runs,
        summaries,
    })
}

impl Report {
    pub fn summary(&self, algorithm: &str, env: Environment) -> Option<&Summary> {
        self.summaries
            .iter()
            .find(|s| s.algorithm == algorithm && s.environment == env)
            .map(|s| &s.summary)
    }

    /// One row per run, in (algorithm, environment, rep) order.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("workflow,family,size,algorithm,environment,seed,tet,usage,wastage,slr,completed,resubmissions\n");
        for r in &self.runs {
            let m = &r.metrics;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{},{}",
                self.workflow,
                self.family,
                self.size,
                r.algorithm,
                r.environment,
                r.seed,
                m.tet,
                m.usage,
                m.wastage,
                m.slr,
                u8::from(m.completed),
                m.resubmissions
            );
        }
        out
    }

    pub fn to_summary_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            workflow: &'a str,
            family: &'a str,
            size: usize,
            seed: u64,
            horizon: f64,
            cells: &'a [SummaryRow],
        }
        let doc = Doc {
            workflow: &self.workflow,
            family: &self.family,
            size: self.size,
            seed: self.seed,
            horizon: self.horizon,
            cells: &self.summaries,
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("summary serializes");
        s.push('\n');
        s
    }
}

/// Writes `runs.csv` and `summary.json` (plus `comparison.txt` when given)
/// into the configured output directory.
pub fn write_reports(cfg: &ExperimentConfig, report: &Report, comparison: Option<&str>) -> Result<(), ExperimentError> {
    let Some(dir) = &cfg.out_dir else {
        return Ok(());
    };
    let io = |path: &Path, source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut files = vec![("runs.csv", report.to_csv()), ("summary.json", report.to_summary_json())];
    if let Some(table) = comparison {
        files.push(("comparison.txt", table.to_string()));
    }
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| io(&path, e))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub environment: Environment,
    pub algorithm: String,
    pub tet: f64,
    pub usage: f64,
    pub wastage: f64,
    pub slr: f64,
    pub completion_rate: f64,
    pub usage_vs_heft: Option<f64>,
    pub wastage_vs_heft: Option<f64>,
    pub usage_vs_crch: Option<f64>,
    pub wastage_vs_crch: Option<f64>,
}

fn ratio(a: f64, b: Option<f64>) -> Option<f64> {
    match b {
        Some(b) if b != 0.0 => Some(a / b),
        Some(_) if a == 0.0 => Some(1.0),
        _ => None,
    }
}

/// Side-by-side means per environment with usage and wastage relative to
/// HEFT and CRCH when those were run. Equal zero wastage counts as ratio 1.
pub fn compare(report: &Report, cfg: &ExperimentConfig) -> Result<Vec<ComparisonRow>, ExperimentError> {
    if cfg.algorithms.len() < 2 {
        return Err(ExperimentError::CompareShape);
    }
    let mut rows = Vec::new();
    for &env in &cfg.environments {
        let base = |name: &str| report.summary(name, env);
        let (heft, crch) = (base("heft"), base("crch"));
        for alg in &cfg.algorithms {
            let name = alg.to_string();
            let Some(s) = report.summary(&name, env) else {
                continue;
            };
            rows.push(ComparisonRow {
                environment: env,
                algorithm: name,
                tet: s.tet.mean,
                usage: s.usage.mean,
                wastage: s.wastage.mean,
                slr: s.slr.mean,
                completion_rate: s.completion_rate,
                usage_vs_heft: ratio(s.usage.mean, heft.map(|h| h.usage.mean)),
                wastage_vs_heft: ratio(s.wastage.mean, heft.map(|h| h.wastage.mean)),
                usage_vs_crch: ratio(s.usage.mean, crch.map(|h| h.usage.mean)),
                wastage_vs_crch: ratio(s.wastage.mean, crch.map(|h| h.wastage.mean)),
            });
        }
    }
    Ok(rows)
}

pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let fmt_ratio = |r: Option<f64>| r.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
    let mut out = format!(
        "{:<10} {:<16} {:>10} {:>10} {:>10} {:>7} {:>6} {:>9} {:>9} {:>9} {:>9}\n",
        "env", "algorithm", "tet", "usage", "wastage", "slr", "done", "use/heft", "waste/heft", "use/crch", "waste/crch"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<10} {:<16} {:>10.3} {:>10.3} {:>10.3} {:>7.3} {:>6.2} {:>9} {:>9} {:>9} {:>9}",
            r.environment.name(),
            r.algorithm,
            r.tet,
            r.usage,
            r.wastage,
            r.slr,
            r.completion_rate,
            fmt_ratio(r.usage_vs_heft),
            fmt_ratio(r.wastage_vs_heft),
            fmt_ratio(r.usage_vs_crch),
            fmt_ratio(r.wastage_vs_crch)
        );
    }
    out
}
