//! Failure environments and the per-VM downtime traces sampled from them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Weibull};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ResourcePool;

#[derive(Debug, Error, PartialEq)]
pub enum FaultError {
    #[error("unknown environment `{0}`")]
    UnknownEnvironment(String),
    #[error("trace horizon must be positive, got {0}")]
    Horizon(f64),
    #[error("profile parameter `{0}` must be positive")]
    Parameter(&'static str),
    #[error("unknown VM `{0}`")]
    UnknownVm(String),
    #[error("malformed trace: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Environment {
    /// No failures at all.
    None,
    Stable,
    Normal,
    Unstable,
}

impl Environment {
    pub const FAILING: [Environment; 3] = [Environment::Stable, Environment::Normal, Environment::Unstable];

    pub fn name(self) -> &'static str {
        match self {
            Environment::None => "none",
            Environment::Stable => "stable",
            Environment::Normal => "normal",
            Environment::Unstable => "unstable",
        }
    }
}

impl fmt::Display for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Environment {
    type Err = FaultError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "ideal" => Ok(Environment::None),
            "stable" => Ok(Environment::Stable),
            "normal" => Ok(Environment::Normal),
            "unstable" => Ok(Environment::Unstable),
            other => Err(FaultError::UnknownEnvironment(other.to_string())),
        }
    }
}

/// Failure-process parameters, all in minutes where they carry a unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentProfile {
    pub name: Environment,
    pub mtbf_shape: f64,
    pub mtbf_scale: f64,
    pub size_shape: f64,
    pub size_scale: f64,
    pub mttr_median: f64,
    pub mttr_sigma: f64,
    pub busy_as_failure: bool,
}

impl EnvironmentProfile {
    pub fn defaults(env: Environment) -> Self {
        // size scales put the mean of ceil(Weibull) near 1, 2 and 3 VMs
        let (mtbf_scale, size_shape, size_scale, mttr_median, busy_as_failure) = match env {
            Environment::None | Environment::Stable => (60.0, 1.5, 0.4, 1.0, true),
            Environment::Normal => (30.0, 2.0, 1.7, 3.0, true),
            Environment::Unstable => (10.0, 2.4, 2.8, 6.0, false),
        };
        EnvironmentProfile {
            name: env,
            mtbf_shape: 12.0,
            mtbf_scale,
            size_shape,
            size_scale,
            mttr_median,
            mttr_sigma: 0.5,
            busy_as_failure,
        }
    }

    pub fn validate(&self) -> Result<(), FaultError> {
        let fields = [
            ("mtbf_shape", self.mtbf_shape),
            ("mtbf_scale", self.mtbf_scale),
            ("size_shape", self.size_shape),
            ("size_scale", self.size_scale),
            ("mttr_median", self.mttr_median),
            ("mttr_sigma", self.mttr_sigma),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(FaultError::Parameter(name));
            }
        }
        Ok(())
    }

    /// Distribution of a single repair time.
    pub fn repair_time(&self) -> LogNormal<f64> {
        LogNormal::new(self.mttr_median.ln(), self.mttr_sigma).expect("validated sigma")
    }

    /// Mean repair time implied by the log-normal parameters.
    pub fn mean_repair_time(&self) -> f64 {
        self.mttr_median * (self.mttr_sigma * self.mttr_sigma / 2.0).exp()
    }
}

/// Half-open downtime `[x, y)`.
pub type Interval = (f64, f64);

#[derive(Debug, Clone, PartialEq)]
pub struct FailureTrace {
    pub horizon: f64,
    pub seed: u64,
    /// Sorted, disjoint downtimes per VM index.
    pub downtimes: Vec<Vec<Interval>>,
}

#[derive(Serialize, Deserialize)]
struct TraceDoc {
    horizon: f64,
    seed: u64,
    downtimes: BTreeMap<String, Vec<Interval>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverlapMode {
    /// Earliest interval starting at or after `from`.
    Next,
    /// The interval that contains `from`.
    Containing,
}

impl FailureTrace {
    pub fn empty(vm_count: usize, horizon: f64) -> Self {
        FailureTrace {
            horizon,
            seed: 0,
            downtimes: vec![Vec::new(); vm_count],
        }
    }

    /// VM indices with at least one downtime.
    pub fn fvm(&self) -> BTreeSet<usize> {
        (0..self.downtimes.len()).filter(|&v| !self.downtimes[v].is_empty()).collect()
    }

    pub fn is_failing(&self, vm: usize) -> bool {
        self.downtimes.get(vm).is_some_and(|d| !d.is_empty())
    }

    pub fn is_down(&self, vm: usize, t: f64) -> bool {
        self.containing(vm, t).is_some()
    }

    pub fn containing(&self, vm: usize, t: f64) -> Option<Interval> {
        self.downtimes[vm].iter().copied().find(|&(x, y)| x <= t && t < y)
    }

    /// Earliest downtime on `vm` starting at or after `t`.
    pub fn next_down(&self, vm: usize, t: f64) -> Option<Interval> {
        let list = &self.downtimes[vm];
        let i = list.partition_point(|&(x, _)| x < t);
        list.get(i).copied()
    }

    pub fn total_downtime(&self) -> f64 {
        self.downtimes.iter().flatten().map(|(x, y)| y - x).sum()
    }

    /// Adds a downtime, merging it with any interval it touches.
    pub fn insert(&mut self, vm: usize, iv: Interval) {
        let (mut x, mut y) = iv;
        if y <= x {
            return;
        }
        let list = &mut self.downtimes[vm];
        let mut kept = Vec::with_capacity(list.len() + 1);
        for &(a, b) in list.iter() {
            if b < x || a > y {
                kept.push((a, b));
            } else {
                x = x.min(a);
                y = y.max(b);
            }
        }
        let at = kept.partition_point(|&(a, _)| a < x);
        kept.insert(at, (x, y));
        *list = kept;
    }

    pub fn to_json(&self, pool: &ResourcePool) -> String {
        let doc = TraceDoc {
            horizon: self.horizon,
            seed: self.seed,
            downtimes: self
                .downtimes
                .iter()
                .enumerate()
                .filter(|(_, d)| !d.is_empty())
                .map(|(v, d)| (pool.vms()[v].id.clone(), d.clone()))
                .collect(),
        };
        let mut out = serde_json::to_string_pretty(&doc).expect("trace serializes");
        out.push('\n');
        out
    }

    pub fn from_json(bytes: &[u8], pool: &ResourcePool) -> Result<Self, FaultError> {
        let doc: TraceDoc = serde_json::from_slice(bytes).map_err(|e| FaultError::Format(e.to_string()))?;
        let mut trace = FailureTrace::empty(pool.len(), doc.horizon);
        trace.seed = doc.seed;
        for (id, list) in doc.downtimes {
            let v = pool.index_of(&id).ok_or(FaultError::UnknownVm(id))?;
            for iv in list {
                trace.insert(v, iv);
            }
        }
        Ok(trace)
    }
}

/// Samples failure episodes up to `horizon`. Gaps between episodes follow the
/// MTBF Weibull; each episode takes down `ceil(size draw)` distinct unreliable
/// VMs for a log-normal repair time each. Reliable VMs never fail.
pub fn build_trace(
    profile: &EnvironmentProfile,
    pool: &ResourcePool,
    horizon: f64,
    seed: u64,
) -> Result<FailureTrace, FaultError> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(FaultError::Horizon(horizon));
    }
    profile.validate()?;
    let mut trace = FailureTrace::empty(pool.len(), horizon);
    trace.seed = seed;
    if profile.name == Environment::None {
        return Ok(trace);
    }
    let candidates: Vec<usize> = pool.unreliable().collect();
    if candidates.is_empty() {
        log::warn!("every VM is reliable; the failure trace is empty");
        return Ok(trace);
    }

    // separate streams keep episode contents aligned when only the timing changes
    let mut clock = ChaCha8Rng::seed_from_u64(seed);
    clock.set_stream(1);
    let mut content = ChaCha8Rng::seed_from_u64(seed);
    content.set_stream(2);
    let gaps = Weibull::new(profile.mtbf_scale, profile.mtbf_shape).map_err(|_| FaultError::Parameter("mtbf"))?;
    let sizes = Weibull::new(profile.size_scale, profile.size_shape).map_err(|_| FaultError::Parameter("size"))?;
    let repair = profile.repair_time();

    let mut t = gaps.sample(&mut clock);
    while t < horizon {
        let size = (sizes.sample(&mut content).ceil() as usize).clamp(1, candidates.len());
        for pick in index::sample(&mut content, candidates.len(), size) {
            let len = repair.sample(&mut content);
            trace.insert(candidates[pick], (t, (t + len).min(horizon)));
        }
        t += gaps.sample(&mut clock);
    }
    Ok(trace)
}

/// Looks up a downtime of `vm` relative to `[from, to]`.
pub fn downtime_overlap(
    trace: &FailureTrace,
    vm: usize,
    from: f64,
    to: f64,
    mode: OverlapMode,
) -> Result<Option<Interval>, FaultError> {
    if vm >= trace.downtimes.len() {
        return Err(FaultError::UnknownVm(vm.to_string()));
    }
    Ok(match mode {
        OverlapMode::Containing => trace.containing(vm, from),
        OverlapMode::Next => trace.next_down(vm, from).filter(|&(x, _)| x < to),
    })
}

/// Draws `n` repair times; used to check the environment calibration.
pub fn sample_repair_times(profile: &EnvironmentProfile, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = profile.repair_time();
    (0..n).map(|_| d.sample(&mut rng)).collect()
}

/// Mean number of VMs hit per episode, estimated from `n` draws.
pub fn mean_failure_size(profile: &EnvironmentProfile, n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Weibull::new(profile.size_scale, profile.size_shape).expect("validated profile");
    (0..n).map(|_| d.sample(&mut rng).ceil().max(1.0)).sum::<f64>() / n as f64
}
