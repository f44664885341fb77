//! B-level ranking, insertion-based HEFT placement, replica over-provisioning
//! and critical-path backtracking.

use std::io::Write;

use crate::clusterrep::ReplicationPlan;
use crate::ingest::WorkflowSpec;

const PATH_EPS: f64 = 1e-9;

/// One scheduled copy. Ordinal 0 is the original.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub task: usize,
    pub ordinal: usize,
    pub vm: usize,
    pub est: f64,
    pub eft: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    placements: Vec<Placement>,
    copies: Vec<Vec<usize>>,
    rank: Vec<f64>,
    order: Vec<usize>,
}

impl Schedule {
    /// Copies in placement order.
    pub fn placements(&self) -> &[Placement] {
        &self.placements
    }

    /// Indices into `placements` for every copy of `task`, by ordinal.
    pub fn copies_of(&self, task: usize) -> &[usize] {
        &self.copies[task]
    }

    pub fn original(&self, task: usize) -> &Placement {
        &self.placements[self.copies[task][0]]
    }

    pub fn copy_count(&self, task: usize) -> usize {
        self.copies[task].len()
    }

    pub fn task_count(&self) -> usize {
        self.copies.len()
    }

    pub fn ranks(&self) -> &[f64] {
        &self.rank
    }

    /// Tasks in descending b-level order, the order originals were placed in.
    pub fn rank_order(&self) -> &[usize] {
        &self.order
    }

    pub fn tet_perfect(&self) -> f64 {
        tet_perfect(self)
    }

    /// Copies on `vm`, sorted by start time.
    pub fn vm_timeline(&self, vm: usize) -> Vec<usize> {
        let mut on: Vec<usize> = (0..self.placements.len()).filter(|&i| self.placements[i].vm == vm).collect();
        on.sort_by(|&a, &b| self.placements[a].est.total_cmp(&self.placements[b].est));
        on
    }

    pub fn copy_id(&self, spec: &WorkflowSpec, idx: usize) -> String {
        let p = &self.placements[idx];
        copy_id(&spec.workflow.task(p.task).id, p.ordinal)
    }

    pub fn write_csv<W: Write>(&self, spec: &WorkflowSpec, mut out: W) -> std::io::Result<()> {
        writeln!(out, "copy,origin,ordinal,vm,est,eft")?;
        for (i, p) in self.placements.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{:.6},{:.6}",
                self.copy_id(spec, i),
                spec.workflow.task(p.task).id,
                p.ordinal,
                spec.pool.vms()[p.vm].id,
                p.est,
                p.eft
            )?;
        }
        Ok(())
    }
}

pub fn copy_id(task_id: &str, ordinal: usize) -> String {
    format!("{task_id}#{ordinal}")
}

/// Longest path to an exit task using mean runtimes and mean transfer times.
pub fn b_levels(spec: &WorkflowSpec) -> Vec<f64> {
    let w = &spec.workflow;
    let topo = w.topological_order().expect("validated workflow is acyclic");
    let mut b = vec![0.0; w.len()];
    for &t in topo.iter().rev() {
        let tail = w
            .children(t)
            .iter()
            .map(|e| spec.pool.mean_transfer(e.data) + b[e.task])
            .fold(0.0, f64::max);
        b[t] = w.task(t).mean_runtime() + tail;
    }
    b
}

fn rank_order(spec: &WorkflowSpec, b: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..b.len()).collect();
    order.sort_by(|&x, &y| {
        b[y].total_cmp(&b[x])
            .then_with(|| spec.workflow.task(x).id.cmp(&spec.workflow.task(y).id))
    });
    order
}

/// Earliest start at or after `ready` where `dur` fits between the sorted,
/// disjoint `busy` intervals.
pub fn find_slot(busy: &[(f64, f64)], ready: f64, dur: f64) -> f64 {
    let mut start = ready;
    for &(s, e) in busy {
        if start + dur <= s {
            return start;
        }
        start = start.max(e);
    }
    start
}

struct Planner<'a> {
    spec: &'a WorkflowSpec,
    busy: Vec<Vec<(f64, f64)>>,
    placements: Vec<Placement>,
    copies: Vec<Vec<usize>>,
}

impl<'a> Planner<'a> {
    fn new(spec: &'a WorkflowSpec) -> Self {
        Planner {
            spec,
            busy: vec![Vec::new(); spec.pool.len()],
            placements: Vec::new(),
            copies: vec![Vec::new(); spec.workflow.len()],
        }
    }

    /// Every parent must have a placed copy; the earliest-arriving copy feeds the task.
    fn data_ready(&self, task: usize, vm: usize) -> f64 {
        self.spec
            .workflow
            .parents(task)
            .iter()
            .map(|e| {
                self.copies[e.task]
                    .iter()
                    .map(|&c| {
                        let p = &self.placements[c];
                        p.eft + self.spec.pool.transfer_time(e.data, p.vm, vm)
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }

    /// Places the next copy of `task` on the min-EST VM (ties: smaller EFT,
    /// then smaller index). VMs holding a sibling are skipped when possible.
    fn place(&mut self, task: usize) {
        let taken: Vec<usize> = self.copies[task].iter().map(|&c| self.placements[c].vm).collect();
        let n = self.spec.pool.len();
        let avoid = taken.len() < n;
        let mut best: Option<(f64, f64, usize)> = None;
        for vm in 0..n {
            if avoid && taken.contains(&vm) {
                continue;
            }
            let dur = self.spec.workflow.task(task).runtimes[vm];
            let est = find_slot(&self.busy[vm], self.data_ready(task, vm), dur);
            let eft = est + dur;
            let better = match best {
                None => true,
                Some((be, bf, _)) => est < be || (est == be && eft < bf),
            };
            if better {
                best = Some((est, eft, vm));
            }
        }
        let (est, eft, vm) = best.expect("pool has at least one VM");
        let slots = &mut self.busy[vm];
        let at = slots.partition_point(|&(s, _)| s < est);
        slots.insert(at, (est, eft));
        let ordinal = self.copies[task].len();
        self.copies[task].push(self.placements.len());
        self.placements.push(Placement {
            task,
            ordinal,
            vm,
            est,
            eft,
        });
    }

    fn place_replicas(&mut self, task: usize, total: usize) {
        while self.copies[task].len() < total {
            self.place(task);
        }
    }
}

/// Plain HEFT: every task placed once, in descending b-level order.
pub fn heft(spec: &WorkflowSpec) -> Schedule {
    overprovision(spec, &ReplicationPlan::all_ones(spec.workflow.len()))
}

/// HEFT with replicas. Once every original child of a task is placed, that
/// task's replicas are placed; exit tasks get theirs after all originals.
pub fn overprovision(spec: &WorkflowSpec, plan: &ReplicationPlan) -> Schedule {
    let w = &spec.workflow;
    assert_eq!(plan.len(), w.len(), "plan must cover every task");
    let b = b_levels(spec);
    let order = rank_order(spec, &b);
    let mut pos = vec![0; w.len()];
    for (i, &t) in order.iter().enumerate() {
        pos[t] = i;
    }

    let mut planner = Planner::new(spec);
    let mut replicated = vec![false; w.len()];
    for &t in &order {
        planner.place(t);
        let mut ready: Vec<usize> = w
            .parents(t)
            .iter()
            .map(|e| e.task)
            .filter(|&p| !replicated[p] && w.children(p).iter().all(|c| !planner.copies[c.task].is_empty()))
            .collect();
        ready.sort_by_key(|&p| pos[p]);
        ready.dedup();
        for p in ready {
            replicated[p] = true;
            planner.place_replicas(p, plan.count(p));
        }
    }
    for &t in &order {
        if !replicated[t] {
            planner.place_replicas(t, plan.count(t));
        }
    }

    Schedule {
        placements: planner.placements,
        copies: planner.copies,
        rank: b,
        order,
    }
}

pub fn tet_perfect(s: &Schedule) -> f64 {
    s.placements.iter().map(|p| p.eft).fold(0.0, f64::max)
}

/// Backtracks from the latest-finishing copy through predecessors whose
/// finish (plus transfer for a parent copy) meets the current start exactly.
/// Returns placement indices, earliest first.
pub fn critical_path(s: &Schedule, spec: &WorkflowSpec) -> Vec<usize> {
    let ps = &s.placements;
    let id = |i: usize| (spec.workflow.task(ps[i].task).id.as_str(), ps[i].ordinal);
    let Some(mut cur) = (0..ps.len()).reduce(|a, b| {
        if ps[b].eft > ps[a].eft || (ps[b].eft == ps[a].eft && id(b) < id(a)) {
            b
        } else {
            a
        }
    }) else {
        return Vec::new();
    };

    let mut path = vec![cur];
    while ps[cur].est > PATH_EPS {
        let c = ps[cur];
        // (transfer, index) of parent copies that feed `c` just in time
        let mut via_edge: Option<(f64, usize)> = None;
        for e in spec.workflow.parents(c.task) {
            for &pc in &s.copies[e.task] {
                let tr = spec.pool.transfer_time(e.data, ps[pc].vm, c.vm);
                if (ps[pc].eft + tr - c.est).abs() <= PATH_EPS {
                    let better = match via_edge {
                        None => true,
                        Some((bt, bi)) => tr > bt || (tr == bt && id(pc) < id(bi)),
                    };
                    if better {
                        via_edge = Some((tr, pc));
                    }
                }
            }
        }
        let prev = via_edge.map(|(_, i)| i).or_else(|| {
            (0..ps.len())
                .filter(|&i| ps[i].vm == c.vm && (ps[i].eft - c.est).abs() <= PATH_EPS)
                .min_by(|&a, &b| id(a).cmp(&id(b)))
        });
        match prev {
            Some(p) => {
                path.push(p);
                cur = p;
            }
            None => break,
        }
    }
    path.reverse();
    path
}

/// Runtimes, transfers and idle gaps along a path; equals its last finish
/// time when the path starts at time zero.
pub fn path_length(s: &Schedule, spec: &WorkflowSpec, path: &[usize]) -> f64 {
    let ps = s.placements();
    let Some(&first) = path.first() else {
        return 0.0;
    };
    let mut len = ps[first].est + (ps[first].eft - ps[first].est);
    for pair in path.windows(2) {
        let (a, b) = (ps[pair[0]], ps[pair[1]]);
        let tr = spec
            .workflow
            .parents(b.task)
            .iter()
            .find(|e| e.task == a.task)
            .map_or(0.0, |e| spec.pool.transfer_time(e.data, a.vm, b.vm));
        let gap = (b.est - a.eft - tr).max(0.0);
        len += tr + gap + (b.eft - b.est);
    }
    len
}
