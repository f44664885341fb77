//! Replication counts learned without labels: PCA on standardized task
//! features, agglomerative clustering driven by a triplet-style merge score,
//! then one count per supercluster by size rank.

use std::cmp::Ordering;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::features::{extract, standardize, FeatureMatrix};
use crate::ingest::WorkflowSpec;
use crate::model::Workflow;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("coverage threshold must be in (0, 1], got {0}")]
    Threshold(f64),
    #[error("empty point set")]
    EmptySet,
    #[error("triplet score needs at least 2 neighbours, got {0}")]
    TooFewNeighbours(usize),
    #[error("cluster j must be one of the neighbours")]
    NotANeighbour,
    #[error("target cluster count must be at least 1")]
    ZeroTarget,
    #[error("cannot form {target} clusters from {points} points")]
    TooFewPoints { points: usize, target: usize },
    #[error("feature matrix has no rows or columns")]
    EmptyMatrix,
}

pub type Point = Vec<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult {
    /// Unit-norm principal axes, strongest first.
    pub components: Vec<Vec<f64>>,
    /// Fraction of total variance per kept component.
    pub explained: Vec<f64>,
    pub projected: Vec<Point>,
}

impl PcaResult {
    pub fn cumulative(&self) -> f64 {
        self.explained.iter().sum()
    }
}

/// Keeps the fewest leading components whose explained variance reaches
/// `cov_threshold`, and projects the (centered) rows onto them.
///
/// Components are sign-normalized so their largest-magnitude entry is positive.
/// A matrix with zero total variance keeps one component that is credited
/// with full coverage.
pub fn pca(m: &FeatureMatrix, cov_threshold: f64) -> Result<PcaResult, ClusterError> {
    if !(cov_threshold > 0.0 && cov_threshold <= 1.0) {
        return Err(ClusterError::Threshold(cov_threshold));
    }
    let (n, d) = (m.n_rows(), m.n_cols());
    if n == 0 || d == 0 {
        return Err(ClusterError::EmptyMatrix);
    }

    let means: Vec<f64> = (0..d).map(|j| m.rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let centered: Vec<Vec<f64>> = m
        .rows
        .iter()
        .map(|r| r.iter().zip(&means).map(|(x, mu)| x - mu).collect())
        .collect();
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for row in &centered {
        for a in 0..d {
            for b in a..d {
                cov[(a, b)] += row[a] * row[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / n as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = values.iter().sum();

    let mut components = Vec::new();
    let mut explained = Vec::new();
    let mut cum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() + 1e-12 { x } else { best });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        let frac = if total > 0.0 { values[rank] / total } else { 1.0 };
        components.push(v);
        explained.push(frac);
        cum += frac;
        if cum + 1e-12 >= cov_threshold {
            break;
        }
    }

    let projected = centered
        .iter()
        .map(|r| {
            components
                .iter()
                .map(|c| c.iter().zip(r).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    Ok(PcaResult {
        components,
        explained,
        projected,
    })
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Mean Euclidean distance over all cross pairs of `a` and `b`.
pub fn affinity(a: &[Point], b: &[Point]) -> Result<f64, ClusterError> {
    if a.is_empty() || b.is_empty() {
        return Err(ClusterError::EmptySet);
    }
    let sum: f64 = a.iter().flat_map(|p| b.iter().map(move |q| euclid(p, q))).sum();
    Ok(sum / (a.len() * b.len()) as f64)
}

/// Merge score of `i` with `j`, where `neighbours` are the R clusters closest
/// to `i` and contain `j`:
/// `D_ij + margin / (R - 1) * sum_k (D_ij - D_ik)`.
pub fn triplet_score(i: &[Point], j: &[Point], neighbours: &[&[Point]], margin: f64) -> Result<f64, ClusterError> {
    let r = neighbours.len();
    if r < 2 {
        return Err(ClusterError::TooFewNeighbours(r));
    }
    if !neighbours.contains(&j) {
        return Err(ClusterError::NotANeighbour);
    }
    let d_ij = affinity(i, j)?;
    let mut spread = 0.0;
    for k in neighbours {
        spread += d_ij - affinity(i, k)?;
    }
    Ok(d_ij + margin / (r - 1) as f64 * spread)
}

/// When to stop merging before the target count is reached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Stop once every inter-cluster distance exceeds this quantile of the
    /// pairwise point distances.
    Percentile(f64),
    Distance(f64),
    Never,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgglomerateParams {
    pub target_k: usize,
    pub neighbours: usize,
    pub margin: f64,
    pub stop: StopRule,
}

impl Default for AgglomerateParams {
    fn default() -> Self {
        AgglomerateParams {
            target_k: 3,
            neighbours: 3,
            margin: 0.5,
            stop: StopRule::Percentile(0.75),
        }
    }
}

/// One dendrogram step. Clusters are named by their smallest member index.
#[derive(Debug, Clone, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub score: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Sorted member lists, ordered by smallest member.
    pub clusters: Vec<Vec<usize>>,
    pub history: Vec<Merge>,
}

impl Clustering {
    pub fn write_dendrogram_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "step,left,right,distance,score,size")?;
        for (s, m) in self.history.iter().enumerate() {
            writeln!(out, "{s},{},{},{:.9},{:.9},{}", m.left, m.right, m.distance, m.score, m.size)?;
        }
        Ok(())
    }
}

/// Linear-interpolated quantile of all pairwise point distances.
pub fn distance_quantile(points: &[Point], q: f64) -> f64 {
    let mut d: Vec<f64> = Vec::new();
    for a in 0..points.len() {
        for b in (a + 1)..points.len() {
            d.push(euclid(&points[a], &points[b]));
        }
    }
    if d.is_empty() {
        return 0.0;
    }
    d.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (d.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    d[lo] + (d[hi] - d[lo]) * (pos - lo as f64)
}

/// Agglomerative clustering from singletons. Every step merges the pair with
/// the globally smallest triplet score, where each cluster only scores its R
/// nearest clusters. Stops at `target_k` clusters or when the closest pair is
/// farther apart than the stop rule allows.
pub fn agglomerate(points: &[Point], params: &AgglomerateParams) -> Result<Clustering, ClusterError> {
    if params.target_k == 0 {
        return Err(ClusterError::ZeroTarget);
    }
    let n = points.len();
    if n < params.target_k {
        return Err(ClusterError::TooFewPoints {
            points: n,
            target: params.target_k,
        });
    }
    let stop_at = match params.stop {
        StopRule::Percentile(q) => distance_quantile(points, q),
        StopRule::Distance(d) => d,
        StopRule::Never => f64::INFINITY,
    };

    // slot-indexed average-linkage distances; merged slots are deactivated
    let mut dist: Vec<Vec<f64>> = (0..n)
        .map(|a| (0..n).map(|b| euclid(&points[a], &points[b])).collect())
        .collect();
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut active: Vec<usize> = (0..n).collect();
    let mut history = Vec::new();

    while active.len() > params.target_k {
        let m = active.len();
        let r = params.neighbours.min(m - 1);
        let mut best: Option<(f64, usize, usize, f64)> = None;
        let mut min_dist = f64::INFINITY;

        for &i in &active {
            let mut others: Vec<(f64, usize)> = active
                .iter()
                .filter(|&&k| k != i)
                .map(|&k| (dist[i][k], members[k][0]))
                .collect();
            others.select_nth_unstable_by(r - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let near = &mut others[..r];
            near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            min_dist = min_dist.min(near[0].0);
            let sum_near: f64 = near.iter().map(|x| x.0).sum();

            for &(d_ij, key_j) in near.iter() {
                let score = if r >= 2 {
                    d_ij + params.margin / (r - 1) as f64 * (r as f64 * d_ij - sum_near)
                } else {
                    d_ij
                };
                let key_i = members[i][0];
                let pair = (key_i.min(key_j), key_i.max(key_j));
                let better = match best {
                    None => true,
                    Some((s, a, b, _)) => match score.total_cmp(&s) {
                        Ordering::Less => true,
                        Ordering::Equal => pair < (a, b),
                        Ordering::Greater => false,
                    },
                };
                if better {
                    best = Some((score, pair.0, pair.1, d_ij));
                }
            }
        }

        if min_dist > stop_at {
            break;
        }
        let (score, ka, kb, d) = best.expect("at least two active clusters");
        let a = *active.iter().find(|&&s| members[s][0] == ka).expect("active key");
        let b = *active.iter().find(|&&s| members[s][0] == kb).expect("active key");
        let (na, nb) = (members[a].len() as f64, members[b].len() as f64);
        for &k in &active {
            if k != a && k != b {
                let v = (na * dist[a][k] + nb * dist[b][k]) / (na + nb);
                dist[a][k] = v;
                dist[k][a] = v;
            }
        }
        let moved = std::mem::take(&mut members[b]);
        members[a].extend(moved);
        members[a].sort_unstable();
        active.retain(|&s| s != b);
        history.push(Merge {
            left: ka,
            right: kb,
            distance: d,
            score,
            size: members[a].len(),
        });
    }

    let mut clusters: Vec<Vec<usize>> = active.into_iter().map(|s| std::mem::take(&mut members[s])).collect();
    clusters.sort();
    Ok(Clustering { clusters, history })
}

/// Total scheduled copies per task, original included, in workflow order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplicationPlan {
    counts: Vec<usize>,
}

impl ReplicationPlan {
    pub fn new(counts: Vec<usize>) -> Self {
        assert!(counts.iter().all(|&c| c >= 1), "every task needs at least one copy");
        ReplicationPlan { counts }
    }

    pub fn uniform(n: usize, copies: usize) -> Self {
        ReplicationPlan::new(vec![copies.max(1); n])
    }

    pub fn all_ones(n: usize) -> Self {
        ReplicationPlan::uniform(n, 1)
    }

    pub fn count(&self, task: usize) -> usize {
        self.counts[task]
    }

    pub fn get(&self, workflow: &Workflow, id: &str) -> Option<usize> {
        workflow.index_of(id).map(|i| self.counts[i])
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total_copies(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Ranks clusters by size (largest first; ties: higher mean runtime, then
/// smallest member id) and gives every task in the i-th cluster `i` copies,
/// capped at `max_count`.
pub fn assign_counts(c: &Clustering, workflow: &Workflow, max_count: usize) -> ReplicationPlan {
    let mean_rt = |members: &[usize]| {
        members.iter().map(|&t| workflow.task(t).mean_runtime()).sum::<f64>() / members.len() as f64
    };
    let min_id = |members: &[usize]| members.iter().map(|&t| workflow.task(t).id.as_str()).min().unwrap_or("");
    let mut ranked: Vec<&Vec<usize>> = c.clusters.iter().filter(|m| !m.is_empty()).collect();
    ranked.sort_by(|a, b| {
        b.len()
            .cmp(&a.len())
            .then(mean_rt(b).total_cmp(&mean_rt(a)))
            .then(min_id(a).cmp(min_id(b)))
    });
    let mut counts = vec![1; workflow.len()];
    for (rank, members) in ranked.iter().enumerate() {
        for &t in members.iter() {
            counts[t] = (rank + 1).min(max_count.max(1));
        }
    }
    ReplicationPlan::new(counts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    pub cov_threshold: f64,
    pub max_replication: usize,
    pub neighbours: usize,
    pub margin: f64,
    pub stop: StopRule,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            cov_threshold: 0.3,
            max_replication: 3,
            neighbours: 3,
            margin: 0.5,
            stop: StopRule::Percentile(0.75),
        }
    }
}

/// Every intermediate product of the count-learning pipeline.
#[derive(Debug, Clone)]
pub struct Learned {
    pub features: FeatureMatrix,
    pub pca: PcaResult,
    pub clustering: Clustering,
    pub plan: ReplicationPlan,
}

pub fn learn(spec: &WorkflowSpec, cfg: &ClusterConfig) -> Result<Learned, ClusterError> {
    let features = extract(spec);
    let pca = pca(&standardize(&features), cfg.cov_threshold)?;
    let target = cfg.max_replication.max(1).min(spec.workflow.len());
    let clustering = agglomerate(
        &pca.projected,
        &AgglomerateParams {
            target_k: target,
            neighbours: cfg.neighbours,
            margin: cfg.margin,
            stop: cfg.stop,
        },
    )?;
    let plan = assign_counts(&clustering, &spec.workflow, cfg.max_replication);
    Ok(Learned {
        features,
        pca,
        clustering,
        plan,
    })
}

/// Replication counts for a workflow under the given clustering settings.
pub fn replication_plan(spec: &WorkflowSpec, cfg: &ClusterConfig) -> Result<ReplicationPlan, ClusterError> {
    learn(spec, cfg).map(|l| l.plan)
}
