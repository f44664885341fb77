use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{IngestError, Metadata, WorkflowSpec};
use crate::model::{Dependency, ResourcePool, Task, Vm, Workflow};

/// Shape families for synthetic workflows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    /// Wide fan-out/fan-in layers around two single-task aggregation points.
    Montage,
    /// Few extraction roots, wide paired stages, two sinks; data volumes x4.
    CyberShake,
    /// Two bank/inspiral stages joined by coincidence tasks; runtimes x4.
    Ligo,
    /// Many independent chains merging late.
    Sipht,
    LayeredRandom,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Montage,
        Family::CyberShake,
        Family::Ligo,
        Family::Sipht,
        Family::LayeredRandom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Montage => "montage-like",
            Family::CyberShake => "cybershake-like",
            Family::Ligo => "ligo-like",
            Family::Sipht => "sipht-like",
            Family::LayeredRandom => "layered-random",
        }
    }

    fn runtime_scale(self) -> f64 {
        if self == Family::Ligo {
            4.0
        } else {
            1.0
        }
    }

    fn data_scale(self) -> f64 {
        if self == Family::CyberShake {
            4.0
        } else {
            1.0
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase();
        let key = key.strip_suffix("-like").unwrap_or(&key);
        Ok(match key {
            "montage" => Family::Montage,
            "cybershake" => Family::CyberShake,
            "ligo" | "inspiral" => Family::Ligo,
            "sipht" => Family::Sipht,
            "layered-random" | "layered" | "random" => Family::LayeredRandom,
            _ => return Err(IngestError::UnknownFamily(s.to_string())),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub family: Family,
    pub size: usize,
    pub vm_count: usize,
    pub reliable: usize,
    pub seed: u64,
    /// Base runtime range in minutes, before the per-VM speed factor.
    pub runtime: (f64, f64),
    pub data: (f64, f64),
    pub rate: (f64, f64),
}

impl GeneratorConfig {
    pub fn new(family: Family, size: usize, vm_count: usize, seed: u64) -> Self {
        GeneratorConfig {
            family,
            size,
            vm_count,
            reliable: vm_count.min(4),
            seed,
            runtime: (1.0, 10.0),
            data: (1.0, 20.0),
            rate: (5.0, 20.0),
        }
    }
}

/// Deterministic synthetic workflow and pool for a config.
pub fn generate(config: &GeneratorConfig) -> WorkflowSpec {
    assert!(config.size >= 1 && config.vm_count >= 1, "size and vm_count must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.size;
    let m = config.vm_count;

    let speeds: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..1.5)).collect();
    let mut rates = vec![vec![0.0; m]; m];
    #[allow(clippy::needless_range_loop)]
    for r in 0..m {
        for s in (r + 1)..m {
            let v = uniform(&mut rng, config.rate);
            rates[r][s] = v;
            rates[s][r] = v;
        }
    }
    let vms = (0..m)
        .map(|i| Vm {
            id: format!("v{:0w$}", i + 1, w = digits(m)),
            reliable: i < config.reliable.max(1).min(m),
        })
        .collect();

    let edges = match config.family {
        Family::Montage if n >= 6 => montage(n),
        Family::CyberShake if n >= 6 => cybershake(n),
        Family::Ligo if n >= 6 => ligo(n),
        Family::Sipht if n >= 4 => sipht(n),
        _ => layered(n, &mut rng),
    };

    let width = digits(n);
    let ids: Vec<String> = (0..n).map(|i| format!("t{:0width$}", i + 1)).collect();
    let tasks = ids
        .iter()
        .map(|id| {
            let base = uniform(&mut rng, config.runtime) * config.family.runtime_scale();
            Task::new(id.clone(), speeds.iter().map(|s| base * s).collect())
                .with_priority(rng.random_range(0..=2))
        })
        .collect();
    let deps = edges
        .into_iter()
        .map(|(p, c)| {
            let data = uniform(&mut rng, config.data) * config.family.data_scale();
            Dependency::new(ids[p].clone(), ids[c].clone(), data)
        })
        .collect();

    let metadata = Metadata {
        name: format!("{}-{}", config.family, n),
        family: config.family.to_string(),
        size: n,
    };
    WorkflowSpec::new(Workflow::new(tasks, deps), ResourcePool::new(vms, rates), metadata)
        .expect("generated workflows are valid by construction")
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn digits(n: usize) -> usize {
    n.to_string().len()
}

fn layered(n: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let layers = ((n as f64).sqrt().round() as usize).clamp(1, n);
    let mut layer_of: Vec<usize> = (0..layers).collect();
    layer_of.extend((layers..n).map(|_| rng.random_range(0..layers)));
    layer_of.sort_unstable();
    let members: Vec<Vec<usize>> = (0..layers)
        .map(|l| (0..n).filter(|&t| layer_of[t] == l).collect())
        .collect();

    let mut edges = Vec::new();
    for l in 1..layers {
        let prev = &members[l - 1];
        for &t in &members[l] {
            let k = rng.random_range(1..=prev.len().min(3));
            let mut parents: Vec<usize> = sample(rng, prev.len(), k).into_iter().map(|i| prev[i]).collect();
            if l >= 2 && rng.random_bool(0.2) {
                let earlier: Vec<usize> = members[..l - 1].iter().flatten().copied().collect();
                parents.push(earlier[rng.random_range(0..earlier.len())]);
            }
            parents.sort_unstable();
            parents.dedup();
            edges.extend(parents.into_iter().map(|p| (p, t)));
        }
    }
    edges
}

fn montage(n: usize) -> Vec<(usize, usize)> {
    let w = (n - 2) / 3;
    let diffs = n - 2 - 2 * w;
    let proj: Vec<usize> = (0..w).collect();
    let diff: Vec<usize> = (w..w + diffs).collect();
    let bg_model = w + diffs;
    let background: Vec<usize> = (bg_model + 1..bg_model + 1 + w).collect();
    let add = n - 1;

    let mut edges = Vec::new();
    for (j, &d) in diff.iter().enumerate() {
        let a = proj[j % w];
        let b = proj[(j + 1) % w];
        edges.push((a, d));
        if b != a {
            edges.push((b, d));
        }
        edges.push((d, bg_model));
    }
    for (i, &b) in background.iter().enumerate() {
        edges.push((proj[i], b));
        edges.push((bg_model, b));
        edges.push((b, add));
    }
    edges
}

fn cybershake(n: usize) -> Vec<(usize, usize)> {
    let mut extract = (n / 20).max(1);
    if (n - extract - 2) % 2 == 1 {
        extract += 1;
    }
    let s = (n - extract - 2) / 2;
    let zip_seis = extract + 2 * s;
    let zip_psa = zip_seis + 1;
    let mut edges = Vec::new();
    for j in 0..s {
        let seis = extract + j;
        let peak = extract + s + j;
        edges.push((j % extract, seis));
        edges.push((seis, peak));
        edges.push((seis, zip_seis));
        edges.push((peak, zip_psa));
    }
    edges
}

fn ligo(n: usize) -> Vec<(usize, usize)> {
    let rest = n - 2;
    let m1 = (rest / 4).max(1);
    let m2 = (rest - 2 * m1) / 2;
    let extra = rest - 2 * m1 - 2 * m2;
    // layout: banks, inspirals, [extra], thinca, trigbanks, inspirals2, thinca2
    let banks = 0..m1;
    let thinca = 2 * m1 + extra;
    let trig0 = thinca + 1;
    let thinca2 = n - 1;
    let mut edges = Vec::new();
    for b in banks {
        edges.push((b, m1 + b));
        edges.push((m1 + b, thinca));
    }
    if extra == 1 {
        edges.push((2 * m1, thinca));
    }
    for j in 0..m2 {
        let trig = trig0 + j;
        let insp = trig0 + m2 + j;
        edges.push((thinca, trig));
        edges.push((trig, insp));
        edges.push((insp, thinca2));
    }
    if m2 == 0 {
        edges.push((thinca, thinca2));
    }
    edges
}

fn sipht(n: usize) -> Vec<(usize, usize)> {
    let merge = n - 2;
    let fin = n - 1;
    let chain_tasks = n - 2;
    let chains = chain_tasks.div_ceil(4);
    let mut edges = Vec::new();
    let mut next = 0;
    for c in 0..chains {
        let len = chain_tasks / chains + usize::from(c < chain_tasks % chains);
        for k in 1..len {
            edges.push((next + k - 1, next + k));
        }
        edges.push((next + len - 1, merge));
        next += len;
    }
    edges.push((merge, fin));
    edges
}
