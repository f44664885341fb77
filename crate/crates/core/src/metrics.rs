//! Run metrics derived from execution logs, their aggregation, and the
//! checkpoint-interval sweep.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::clusterrep::ReplicationPlan;
use crate::faults::{build_trace, EnvironmentProfile, FaultError};
use crate::ingest::WorkflowSpec;
use crate::scheduler::{critical_path, heft, overprovision, Schedule};
use crate::simruntime::{simulate, CheckpointConfig, ExecutionLog, SegmentEnd, SimConfig, SimError};

/// Trace horizon as a multiple of the fault-free makespan.
pub const HORIZON_FACTOR: f64 = 20.0;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("log has {log} copies but the schedule has {schedule}")]
    Mismatch { log: usize, schedule: usize },
    #[error("nothing to aggregate")]
    Empty,
    #[error("sweep needs at least two intervals and one seed")]
    SweepShape,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Fault(#[from] FaultError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunMetrics {
    pub tet: f64,
    pub usage: f64,
    pub wastage: f64,
    pub slr: f64,
    pub completed: bool,
    pub resubmissions: u32,
    pub replica_executions: u32,
}

/// Metrics of one simulated run.
///
/// Wastage counts the work after the last checkpoint of every failed stretch,
/// plus all work of copies still running when a sibling finished first. A run
/// that never completes wastes everything it used.
pub fn compute(log: &ExecutionLog, s: &Schedule, spec: &WorkflowSpec) -> Result<RunMetrics, MetricsError> {
    if log.copies.len() != s.placements().len() {
        return Err(MetricsError::Mismatch {
            log: log.copies.len(),
            schedule: s.placements().len(),
        });
    }
    let usage: f64 = log.segments.iter().map(|g| g.duration()).sum();
    let wastage = if log.completed {
        log.segments
            .iter()
            .map(|g| {
                let task = log.copies[g.copy].task;
                let won_at = log.finish[task].unwrap_or(f64::INFINITY);
                if log.winners[task] != Some(g.copy) && g.end >= won_at {
                    g.duration()
                } else if g.outcome == SegmentEnd::Failed {
                    g.end - g.last_checkpoint
                } else {
                    0.0
                }
            })
            .sum()
    } else {
        usage
    };
    let tet = log.tet();
    let path = critical_path(s, spec);
    let head = s.placements()[path[0]].task;
    let replica_executions = (0..log.copies.len())
        .filter(|&c| log.copies[c].ordinal > 0 && log.segments.iter().any(|g| g.copy == c))
        .count() as u32;
    Ok(RunMetrics {
        tet,
        usage,
        wastage,
        slr: tet / s.ranks()[head],
        completed: log.completed,
        resubmissions: log.resubmissions,
        replica_executions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// Mean and population standard deviation.
    pub fn of(values: impl Iterator<Item = f64> + Clone) -> Stat {
        let n = values.clone().count() as f64;
        let mean = values.clone().sum::<f64>() / n;
        let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Stat { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub reps: usize,
    pub completion_rate: f64,
    pub tet: Stat,
    pub usage: Stat,
    pub wastage: Stat,
    pub slr: Stat,
    pub resubmissions: Stat,
    pub replica_executions: Stat,
}

/// Means and spreads over every run, failed ones included.
pub fn aggregate(runs: &[RunMetrics]) -> Result<Summary, MetricsError> {
    if runs.is_empty() {
        return Err(MetricsError::Empty);
    }
    let it = || runs.iter();
    Ok(Summary {
        reps: runs.len(),
        completion_rate: it().filter(|r| r.completed).count() as f64 / runs.len() as f64,
        tet: Stat::of(it().map(|r| r.tet)),
        usage: Stat::of(it().map(|r| r.usage)),
        wastage: Stat::of(it().map(|r| r.wastage)),
        slr: Stat::of(it().map(|r| r.slr)),
        resubmissions: Stat::of(it().map(|r| r.resubmissions as f64)),
        replica_executions: Stat::of(it().map(|r| r.replica_executions as f64)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub mean_tet: f64,
    /// Mean TET of the same runs with checkpoints made free.
    pub mean_tet_co_free: f64,
    /// `mean_tet_co_free * gamma / lambda`.
    pub co: f64,
    /// `mean_tet_co_free * (1 + gamma / lambda)`.
    pub model_tet: f64,
}

/// Mean TET per checkpoint interval over paired failure traces, with the
/// overhead-free TET and the multiplicative overhead term alongside.
pub fn lambda_sweep(
    spec: &WorkflowSpec,
    plan: &ReplicationPlan,
    profile: &EnvironmentProfile,
    lambdas: &[f64],
    gamma: f64,
    seeds: &[u64],
) -> Result<Vec<SweepPoint>, MetricsError> {
    if lambdas.len() < 2 || seeds.is_empty() {
        return Err(MetricsError::SweepShape);
    }
    let s = overprovision(spec, plan);
    let horizon = HORIZON_FACTOR * s.tet_perfect().max(heft(spec).tet_perfect());
    let traces = seeds
        .iter()
        .map(|&seed| build_trace(profile, &spec.pool, horizon, seed))
        .collect::<Result<Vec<_>, _>>()?;

    lambdas
        .iter()
        .map(|&lambda| {
            let with = SimConfig::new(CheckpointConfig::fixed(lambda, gamma)?, profile, true);
            let free = SimConfig::new(CheckpointConfig::fixed(lambda, 0.0)?, profile, true);
            let tets = traces
                .par_iter()
                .map(|trace| {
                    let a = simulate(&s, trace, &with, spec)?.tet();
                    let b = simulate(&s, trace, &free, spec)?.tet();
                    Ok((a, b))
                })
                .collect::<Result<Vec<_>, SimError>>()?;
            let n = tets.len() as f64;
            let mean_tet = tets.iter().map(|t| t.0).sum::<f64>() / n;
            let mean_tet_co_free = tets.iter().map(|t| t.1).sum::<f64>() / n;
            Ok(SweepPoint {
                lambda,
                mean_tet,
                mean_tet_co_free,
                co: mean_tet_co_free * gamma / lambda,
                model_tet: mean_tet_co_free * (1.0 + gamma / lambda),
            })
        })
        .collect()
}

/// Interval with the lowest mean TET; ties go to the smaller interval.
pub fn argmin_lambda(curve: &[SweepPoint]) -> Option<f64> {
    curve
        .iter()
        .min_by(|a, b| a.mean_tet.total_cmp(&b.mean_tet).then(a.lambda.total_cmp(&b.lambda)))
        .map(|p| p.lambda)
}
