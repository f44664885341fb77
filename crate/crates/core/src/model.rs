//! Immutable workflow and resource model.
//!
//! A [`Workflow`] is a DAG of [`Task`]s joined by [`Dependency`] edges that carry
//! a data volume. A [`ResourcePool`] is a fully connected set of VMs with a
//! pairwise transfer-rate matrix and a reliable subset. Durations are minutes,
//! data volumes are abstract data units and rates are data units per minute.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// A single workflow task with one runtime per VM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    #[serde(default)]
    pub priority: i64,
    pub runtimes: Vec<f64>,
}

impl Task {
    pub fn new(id: impl Into<String>, runtimes: Vec<f64>) -> Self {
        Task {
            id: id.into(),
            priority: 0,
            runtimes,
        }
    }

    pub fn with_priority(mut self, priority: i64) -> Self {
        self.priority = priority;
        self
    }

    /// Arithmetic mean of the per-VM runtimes.
    pub fn mean_runtime(&self) -> f64 {
        if self.runtimes.is_empty() {
            return 0.0;
        }
        self.runtimes.iter().sum::<f64>() / self.runtimes.len() as f64
    }
}

/// `parent` sends `data` units to `child`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dependency {
    pub parent: String,
    pub child: String,
    pub data: f64,
}

impl Dependency {
    pub fn new(parent: impl Into<String>, child: impl Into<String>, data: f64) -> Self {
        Dependency {
            parent: parent.into(),
            child: child.into(),
            data,
        }
    }
}

/// An edge resolved to task indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub task: usize,
    pub data: f64,
}

/// Task DAG with index-based adjacency.
///
/// Construction never fails; structural problems (dangling endpoints,
/// duplicate ids, cycles) are reported by [`validate`]. Adjacency lists only
/// contain edges whose endpoints resolve.
#[derive(Debug, Clone, PartialEq)]
pub struct Workflow {
    tasks: Vec<Task>,
    deps: Vec<Dependency>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<Edge>>,
    children: Vec<Vec<Edge>>,
}

impl Workflow {
    pub fn new(tasks: Vec<Task>, deps: Vec<Dependency>) -> Self {
        let mut index = HashMap::with_capacity(tasks.len());
        for (i, t) in tasks.iter().enumerate() {
            index.entry(t.id.clone()).or_insert(i);
        }
        let mut parents = vec![Vec::new(); tasks.len()];
        let mut children = vec![Vec::new(); tasks.len()];
        for d in &deps {
            if let (Some(&p), Some(&c)) = (index.get(&d.parent), index.get(&d.child)) {
                parents[c].push(Edge { task: p, data: d.data });
                children[p].push(Edge { task: c, data: d.data });
            }
        }
        Workflow {
            tasks,
            deps,
            index,
            parents,
            children,
        }
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn deps(&self) -> &[Dependency] {
        &self.deps
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn task(&self, idx: usize) -> &Task {
        &self.tasks[idx]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn parents(&self, idx: usize) -> &[Edge] {
        &self.parents[idx]
    }

    pub fn children(&self, idx: usize) -> &[Edge] {
        &self.children[idx]
    }

    pub fn entry_tasks(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.parents[i].is_empty())
    }

    pub fn exit_tasks(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.children[i].is_empty())
    }

    /// Kahn topological order, or `None` when the resolved edges contain a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.len();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut stack: Vec<usize> = (0..n).rev().filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(u) = stack.pop() {
            order.push(u);
            for e in self.children[u].iter().rev() {
                indeg[e.task] -= 1;
                if indeg[e.task] == 0 {
                    stack.push(e.task);
                }
            }
        }
        (order.len() == n).then_some(order)
    }
}

/// One VM of the pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vm {
    pub id: String,
    #[serde(default)]
    pub reliable: bool,
}

/// Fully connected VM set with a row-major transfer-rate matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourcePool {
    vms: Vec<Vm>,
    rates: Vec<Vec<f64>>,
}

impl ResourcePool {
    pub fn new(vms: Vec<Vm>, rates: Vec<Vec<f64>>) -> Self {
        ResourcePool { vms, rates }
    }

    /// `n` VMs, the first `reliable` of them reliable, all rates equal to `rate`.
    pub fn uniform(n: usize, reliable: usize, rate: f64) -> Self {
        let vms = (0..n)
            .map(|i| Vm {
                id: format!("v{}", i + 1),
                reliable: i < reliable,
            })
            .collect();
        ResourcePool {
            vms,
            rates: vec![vec![rate; n]; n],
        }
    }

    pub fn vms(&self) -> &[Vm] {
        &self.vms
    }

    pub fn rates(&self) -> &[Vec<f64>] {
        &self.rates
    }

    pub fn len(&self) -> usize {
        self.vms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vms.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.vms.iter().position(|v| v.id == id)
    }

    pub fn is_reliable(&self, vm: usize) -> bool {
        self.vms[vm].reliable
    }

    pub fn reliable(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.vms[i].reliable)
    }

    pub fn unreliable(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| !self.vms[i].reliable)
    }

    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.rates[from][to]
    }

    /// Minutes to move `data` units from `from` to `to`; zero on the same VM.
    pub fn transfer_time(&self, data: f64, from: usize, to: usize) -> f64 {
        if from == to || data == 0.0 {
            0.0
        } else {
            data / self.rates[from][to]
        }
    }

    /// Mean transfer time of `data` units over all ordered pairs of distinct VMs.
    pub fn mean_transfer(&self, data: f64) -> f64 {
        let n = self.len();
        if n < 2 || data == 0.0 {
            return 0.0;
        }
        let mut sum = 0.0;
        for r in 0..n {
            for s in 0..n {
                if r != s {
                    sum += data / self.rates[r][s];
                }
            }
        }
        sum / (n * (n - 1)) as f64
    }
}

/// Mean runtime of a task over all VMs.
pub fn mean_runtime(task: &Task) -> f64 {
    task.mean_runtime()
}

/// Mean transfer time of a dependency's data over all ordered distinct VM pairs.
pub fn mean_transfer(dep: &Dependency, pool: &ResourcePool) -> f64 {
    pool.mean_transfer(dep.data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    fn push(&mut self, severity: Severity, message: impl Into<String>) {
        self.issues.push(Issue {
            severity,
            message: message.into(),
        });
    }

    pub fn has(&self, needle: &str) -> bool {
        self.issues.iter().any(|i| i.message.contains(needle))
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let msgs: Vec<&str> = self.errors().map(|i| i.message.as_str()).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

/// Checks every structural and numeric invariant of a workflow/pool pair.
///
/// Problems are collected rather than returned early, so one call reports all
/// of them.
pub fn validate(workflow: &Workflow, pool: &ResourcePool) -> ValidationReport {
    let mut report = ValidationReport::default();

    if workflow.is_empty() {
        report.push(Severity::Error, "no entry task");
        report.push(Severity::Error, "no exit task");
    }
    if pool.is_empty() {
        report.push(Severity::Error, "resource pool has no VMs");
    }
    if !pool.is_empty() && pool.reliable().next().is_none() {
        report.push(Severity::Error, "resource pool has no reliable VM");
    }

    let mut seen = HashMap::new();
    for t in workflow.tasks() {
        if seen.insert(t.id.as_str(), ()).is_some() {
            report.push(Severity::Error, format!("duplicate task id {}", t.id));
        }
        if t.runtimes.len() != pool.len() {
            report.push(
                Severity::Error,
                format!(
                    "task {} has {} runtimes but the pool has {} VMs",
                    t.id,
                    t.runtimes.len(),
                    pool.len()
                ),
            );
        }
        if t.runtimes.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            report.push(Severity::Error, format!("task {} has a nonpositive runtime", t.id));
        }
    }

    for d in workflow.deps() {
        for end in [&d.parent, &d.child] {
            if workflow.index_of(end).is_none() {
                report.push(
                    Severity::Error,
                    format!("dependency {} -> {} references unknown task {}", d.parent, d.child, end),
                );
            }
        }
        if d.parent == d.child {
            report.push(Severity::Error, format!("self dependency on {} (cycle)", d.parent));
        }
        if !(d.data.is_finite() && d.data >= 0.0) {
            report.push(
                Severity::Error,
                format!("dependency {} -> {} has negative data volume", d.parent, d.child),
            );
        }
    }

    if !workflow.is_empty() {
        if workflow.topological_order().is_none() {
            report.push(Severity::Error, "dependency graph contains a cycle");
        }
        if workflow.entry_tasks().next().is_none() {
            report.push(Severity::Error, "no entry task");
        }
        if workflow.exit_tasks().next().is_none() {
            report.push(Severity::Error, "no exit task");
        }
    }

    if pool.rates().len() != pool.len() || pool.rates().iter().any(|row| row.len() != pool.len()) {
        report.push(Severity::Error, "rate matrix shape does not match VM count");
    } else {
        for r in 0..pool.len() {
            for s in 0..pool.len() {
                let rate = pool.rate(r, s);
                if r != s && !(rate.is_finite() && rate > 0.0) {
                    report.push(
                        Severity::Error,
                        format!("nonpositive rate between {} and {}", pool.vms()[r].id, pool.vms()[s].id),
                    );
                }
            }
        }
    }

    let mut vm_ids = HashMap::new();
    for v in pool.vms() {
        if vm_ids.insert(v.id.as_str(), ()).is_some() {
            report.push(Severity::Error, format!("duplicate VM id {}", v.id));
        }
    }

    let ok = report.errors().next().is_none();
    report.ok = ok;
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> (Workflow, ResourcePool) {
        let tasks = vec![
            Task::new("A", vec![1.0, 2.0]),
            Task::new("B", vec![1.0, 2.0]),
            Task::new("C", vec![1.0, 2.0]),
        ];
        let deps = vec![Dependency::new("A", "B", 1.0), Dependency::new("B", "C", 1.0)];
        (Workflow::new(tasks, deps), ResourcePool::uniform(2, 1, 1.0))
    }

    #[test]
    fn empty_workflow_has_no_entry() {
        let r = validate(&Workflow::new(vec![], vec![]), &ResourcePool::uniform(2, 1, 1.0));
        assert!(!r.ok);
        assert!(r.has("no entry task"));
    }

    #[test]
    fn chain_is_valid() {
        let (w, p) = chain();
        let r = validate(&w, &p);
        assert!(r.ok, "{r}");
        assert_eq!(w.topological_order().unwrap(), vec![0, 1, 2]);
    }

    /// Independent recursive DFS with colours.
    fn dfs_has_cycle(w: &Workflow) -> bool {
        fn visit(w: &Workflow, u: usize, colour: &mut [u8]) -> bool {
            colour[u] = 1;
            for e in w.children(u) {
                if colour[e.task] == 1 || (colour[e.task] == 0 && visit(w, e.task, colour)) {
                    return true;
                }
            }
            colour[u] = 2;
            false
        }
        let mut colour = vec![0u8; w.len()];
        (0..w.len()).any(|u| colour[u] == 0 && visit(w, u, &mut colour))
    }

    #[test]
    fn two_cycle_detected() {
        let w = Workflow::new(
            vec![Task::new("A", vec![1.0]), Task::new("B", vec![1.0])],
            vec![Dependency::new("A", "B", 1.0), Dependency::new("B", "A", 1.0)],
        );
        assert!(dfs_has_cycle(&w));
        let r = validate(&w, &ResourcePool::uniform(1, 1, 1.0));
        assert!(!r.ok);
        assert!(r.has("cycle"));
    }

    #[test]
    fn reports_shape_and_value_problems() {
        let w = Workflow::new(
            vec![Task::new("A", vec![1.0]), Task::new("B", vec![0.0, 1.0])],
            vec![Dependency::new("A", "Z", 1.0)],
        );
        let mut p = ResourcePool::uniform(2, 1, 1.0);
        p.rates[0][1] = 0.0;
        let r = validate(&w, &p);
        assert!(!r.ok);
        assert!(r.has("has 1 runtimes"));
        assert!(r.has("nonpositive runtime"));
        assert!(r.has("unknown task Z"));
        assert!(r.has("nonpositive rate"));
    }

    #[test]
    fn mean_runtime_examples() {
        assert_eq!(Task::new("a", vec![2.0, 3.0]).mean_runtime(), 2.5);
        assert_eq!(Task::new("a", vec![4.0]).mean_runtime(), 4.0);
        assert_eq!(mean_runtime(&Task::new("a", vec![2.0, 4.0, 6.0])), 4.0);
    }

    #[test]
    fn mean_transfer_examples() {
        let p = ResourcePool::uniform(2, 1, 1.0);
        assert_eq!(mean_transfer(&Dependency::new("a", "b", 0.0), &p), 0.0);
        assert_eq!(mean_transfer(&Dependency::new("a", "b", 1.0), &p), 1.0);
        let p = ResourcePool::new(p.vms().to_vec(), vec![vec![0.0, 1.0], vec![2.0, 0.0]]);
        assert_eq!(mean_transfer(&Dependency::new("a", "b", 4.0), &p), 3.0);
    }

    #[test]
    fn same_vm_transfer_is_free() {
        let p = ResourcePool::uniform(3, 1, 2.0);
        assert_eq!(p.transfer_time(10.0, 1, 1), 0.0);
        assert_eq!(p.transfer_time(10.0, 0, 1), 5.0);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn mean_runtime_permutation_invariant(mut rs in prop::collection::vec(0.1f64..100.0, 1..8), rot in 0usize..8) {
                let a = Task::new("t", rs.clone()).mean_runtime();
                let k = rot % rs.len();
                rs.rotate_left(k);
                let b = Task::new("t", rs).mean_runtime();
                prop_assert!((a - b).abs() < 1e-9);
            }

            #[test]
            fn mean_transfer_linear_and_permutation_invariant(
                n in 2usize..5,
                seed_rates in prop::collection::vec(0.5f64..10.0, 25),
                data in 0.0f64..50.0,
                k in 0.0f64..5.0,
            ) {
                let rates: Vec<Vec<f64>> = (0..n).map(|r| (0..n).map(|s| seed_rates[r * 5 + s]).collect()).collect();
                let pool = ResourcePool::new(ResourcePool::uniform(n, 1, 1.0).vms().to_vec(), rates.clone());
                let base = pool.mean_transfer(data);
                prop_assert!((pool.mean_transfer(data * k) - base * k).abs() < 1e-9 * (1.0 + base * k));
                // reverse VM order
                let rev: Vec<Vec<f64>> = (0..n).map(|r| (0..n).map(|s| rates[n - 1 - r][n - 1 - s]).collect()).collect();
                let pool_rev = ResourcePool::new(pool.vms().to_vec(), rev);
                prop_assert!((pool_rev.mean_transfer(data) - base).abs() < 1e-9 * (1.0 + base));
            }
        }
    }
}
