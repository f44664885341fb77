//! Discrete-event replay of a schedule against a failure trace, with
//! light-weight checkpoints, busy-VM handling and last-copy resubmission.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};
use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::faults::{EnvironmentProfile, FailureTrace, Interval};
use crate::ingest::WorkflowSpec;
use crate::scheduler::{copy_id, find_slot, Schedule};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("checkpoint interval must be positive and exceed the overhead (lambda {lambda}, gamma {gamma})")]
    Checkpoint { lambda: f64, gamma: f64 },
    #[error("automatic checkpoint interval needs a positive overhead, got {0}")]
    AutoGamma(f64),
    #[error("trace covers {trace} VMs but the pool has {pool}")]
    TraceShape { trace: usize, pool: usize },
    #[error("schedule covers {schedule} tasks but the workflow has {workflow}")]
    ScheduleShape { schedule: usize, workflow: usize },
    #[error("schedule ends at {makespan} but the trace horizon is {horizon}")]
    Horizon { makespan: f64, horizon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckpointMode {
    Fixed,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckpointConfig {
    pub lambda: f64,
    pub gamma: f64,
    pub mode: CheckpointMode,
}

impl CheckpointConfig {
    pub fn fixed(lambda: f64, gamma: f64) -> Result<Self, SimError> {
        let cp = CheckpointConfig {
            lambda,
            gamma,
            mode: CheckpointMode::Fixed,
        };
        cp.validate().map(|_| cp)
    }

    pub fn auto(profile: &EnvironmentProfile, gamma: f64) -> Result<Self, SimError> {
        let cp = CheckpointConfig {
            lambda: auto_lambda(profile, gamma)?,
            gamma,
            mode: CheckpointMode::Auto,
        };
        cp.validate().map(|_| cp)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let ok = self.lambda.is_finite() && self.lambda > 0.0 && self.gamma >= 0.0 && self.gamma < self.lambda;
        if ok {
            Ok(())
        } else {
            Err(SimError::Checkpoint {
                lambda: self.lambda,
                gamma: self.gamma,
            })
        }
    }

    /// Checkpoints taken while computing `executed` minutes from scratch.
    pub fn checkpoints_in(&self, executed: f64) -> u32 {
        (executed / self.lambda).floor() as u32
    }

    /// Wall time to compute `runtime` minutes starting after `alpha` checkpoints.
    pub fn wall_time(&self, runtime: f64, alpha: u32) -> f64 {
        let k = self.checkpoints_in(runtime);
        (runtime - alpha as f64 * self.lambda) + (k.saturating_sub(alpha)) as f64 * self.gamma
    }
}

/// `sqrt(2 * gamma * mtbf_scale)`, kept within `[2 * gamma, 10 * mttr_median]`.
pub fn auto_lambda(profile: &EnvironmentProfile, gamma: f64) -> Result<f64, SimError> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(SimError::AutoGamma(gamma));
    }
    let lo = 2.0 * gamma;
    let hi = lo.max(10.0 * profile.mttr_median);
    Ok((2.0 * gamma * profile.mtbf_scale).sqrt().clamp(lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub checkpoint: CheckpointConfig,
    /// Terminate a non-last copy whose VM is busy when it becomes ready.
    pub busy_as_failure: bool,
    /// Resubmit a task whose last copy failed; without it the run is lost.
    pub resubmit: bool,
}

impl SimConfig {
    pub fn new(checkpoint: CheckpointConfig, profile: &EnvironmentProfile, resubmit: bool) -> Self {
        SimConfig {
            checkpoint,
            busy_as_failure: profile.busy_as_failure,
            resubmit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pending,
    Waiting,
    Running,
    Failed,
    Done,
    Terminated,
}

impl Status {
    fn alive(self) -> bool {
        matches!(self, Status::Pending | Status::Waiting | Status::Running)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CopyState {
    pub task: usize,
    pub ordinal: usize,
    pub status: Status,
    pub vm: usize,
    pub ast: Option<f64>,
    pub aft: Option<f64>,
    /// Checkpoints completed in the current run.
    pub alpha: u32,
    /// Checkpoint minutes charged in the current run.
    pub overhead: f64,
    /// Compute minutes finished in the current run.
    pub executed: f64,
    pub resubmitted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentEnd {
    Completed,
    Failed,
    Truncated,
}

/// A stretch of wall time a copy held a VM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub copy: usize,
    pub vm: usize,
    pub start: f64,
    pub end: f64,
    /// When the last checkpoint of this stretch completed (or `start`).
    pub last_checkpoint: f64,
    pub outcome: SegmentEnd,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Start,
    Checkpoint,
    VmDown,
    VmUp,
    CopyFailed,
    Resubmit,
    WaitBusy,
    TerminateReplica,
    Complete,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogEvent {
    pub time: f64,
    pub kind: EventKind,
    pub copy: Option<usize>,
    pub vm: Option<usize>,
    pub detail: String,
}

/// Where a finished task's outputs live.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoreEntry {
    pub vm: usize,
    pub handle: u64,
    /// The storing VM may fail, so the payload is replicated.
    pub replicated: bool,
}

pub type GlobalStore = BTreeMap<usize, StoreEntry>;

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionLog {
    pub events: Vec<LogEvent>,
    /// Final state per copy, indexed like the schedule's placements.
    pub copies: Vec<CopyState>,
    pub segments: Vec<Segment>,
    pub failures: Vec<u32>,
    pub store: GlobalStore,
    pub completed: bool,
    pub error: Option<String>,
    /// First completion time per task.
    pub finish: Vec<Option<f64>>,
    pub winners: Vec<Option<usize>>,
    pub resubmissions: u32,
    pub horizon: f64,
    pub checkpoint: CheckpointConfig,
}

impl ExecutionLog {
    /// Latest first-completion time, or the horizon when some task never finished.
    pub fn tet(&self) -> f64 {
        if self.completed {
            self.finish.iter().flatten().copied().fold(0.0, f64::max)
        } else {
            self.horizon
        }
    }

    pub fn write_ndjson<W: Write>(&self, spec: &WorkflowSpec, mut out: W) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct Row<'a> {
            time: f64,
            kind: EventKind,
            copy: Option<String>,
            vm: Option<&'a str>,
            detail: &'a str,
        }
        for e in &self.events {
            let row = Row {
                time: e.time,
                kind: e.kind,
                copy: e.copy.map(|c| {
                    let s = &self.copies[c];
                    copy_id(&spec.workflow.task(s.task).id, s.ordinal)
                }),
                vm: e.vm.map(|v| spec.pool.vms()[v].id.as_str()),
                detail: &e.detail,
            };
            serde_json::to_writer(&mut out, &row)?;
            writeln!(out)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decision {
    MoveTo { vm: usize, est: f64 },
    StayUntil { resume: f64, remaining: f64 },
}

/// Last-copy resubmission: the work saved by checkpoints is what a move
/// throws away, so move only when `min_est + saved` beats the repair time.
pub fn decide_resubmission(
    runtime: f64,
    alpha: u32,
    lambda: f64,
    window: Interval,
    min_est: Option<(usize, f64)>,
) -> Decision {
    let saved = alpha as f64 * lambda;
    match min_est {
        Some((vm, est)) if est + saved < window.1 => Decision::MoveTo { vm, est },
        _ => Decision::StayUntil {
            resume: window.1,
            remaining: runtime - saved,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ev {
    Complete(usize, u64),
    Checkpoint(usize, u64),
    VmDown(usize, usize),
    VmUp(usize),
    Ready(usize, u64),
    Dispatch(usize),
}

impl Ev {
    fn class(&self) -> u8 {
        match self {
            Ev::Complete(..) => 0,
            Ev::Checkpoint(..) => 1,
            Ev::VmDown(..) => 2,
            Ev::VmUp(..) => 3,
            Ev::Ready(..) => 4,
            Ev::Dispatch(..) => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Item {
    time: f64,
    class: u8,
    seq: u64,
    ev: Ev,
}

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        self.time
            .total_cmp(&o.time)
            .then(self.class.cmp(&o.class))
            .then(self.seq.cmp(&o.seq))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

struct Live {
    state: CopyState,
    est: f64,
    runtime: f64,
    epoch: u64,
    fail_time: f64,
    ready_at: Option<f64>,
    seg_start: f64,
    seg_end: f64,
    last_ckpt: f64,
}

struct Engine<'a> {
    spec: &'a WorkflowSpec,
    trace: &'a FailureTrace,
    cfg: SimConfig,
    now: f64,
    heap: BinaryHeap<Reverse<Item>>,
    seq: u64,
    copies: Vec<Live>,
    by_task: Vec<Vec<usize>>,
    running: Vec<Option<usize>>,
    queue: Vec<Vec<usize>>,
    winner: Vec<Option<usize>>,
    done: Vec<Vec<usize>>,
    failures: Vec<u32>,
    events: Vec<LogEvent>,
    segments: Vec<Segment>,
    store: GlobalStore,
    resubmissions: u32,
    error: Option<String>,
}

impl<'a> Engine<'a> {
    fn push(&mut self, time: f64, ev: Ev) {
        self.seq += 1;
        self.heap.push(Reverse(Item {
            time,
            class: ev.class(),
            seq: self.seq,
            ev,
        }));
    }

    fn log(&mut self, kind: EventKind, copy: Option<usize>, vm: Option<usize>, detail: impl Into<String>) {
        self.events.push(LogEvent {
            time: self.now,
            kind,
            copy,
            vm,
            detail: detail.into(),
        });
    }

    fn cp(&self) -> CheckpointConfig {
        self.cfg.checkpoint
    }

    /// When every parent has a finished copy: the latest over parents of the
    /// earliest data arrival on `vm`.
    fn arrival(&self, task: usize, vm: usize) -> Option<f64> {
        let mut at: f64 = 0.0;
        for e in self.spec.workflow.parents(task) {
            let best = self.done[e.task]
                .iter()
                .map(|&c| {
                    let s = &self.copies[c].state;
                    s.aft.expect("done copy has a finish time") + self.spec.pool.transfer_time(e.data, s.vm, vm)
                })
                .fold(f64::INFINITY, f64::min);
            if best.is_infinite() {
                return None;
            }
            at = at.max(best);
        }
        Some(at)
    }

    fn schedule_ready(&mut self, c: usize) {
        let l = &self.copies[c];
        if l.state.status != Status::Pending {
            return;
        }
        let Some(a) = self.arrival(l.state.task, l.state.vm) else {
            return;
        };
        let r = l.est.max(a).max(self.now);
        if l.ready_at.is_none_or(|old| r < old) {
            let l = &mut self.copies[c];
            l.ready_at = Some(r);
            l.epoch += 1;
            let epoch = l.epoch;
            self.push(r, Ev::Ready(c, epoch));
        }
    }

    fn other_alive(&self, task: usize, except: usize) -> bool {
        self.by_task[task]
            .iter()
            .any(|&c| c != except && self.copies[c].state.status.alive())
    }

    fn remaining_wall(&self, c: usize) -> f64 {
        let l = &self.copies[c];
        self.cp().wall_time(l.runtime, l.state.alpha)
    }

    /// Projected busy intervals on `vm` from running and queued copies.
    fn reservations(&self, vm: usize) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for (c, l) in self.copies.iter().enumerate() {
            if l.state.vm != vm {
                continue;
            }
            match l.state.status {
                Status::Running => out.push((l.seg_start, l.seg_end)),
                Status::Pending | Status::Waiting => {
                    let s = l.est.max(self.now);
                    out.push((s, s + self.remaining_wall(c)));
                }
                _ => {}
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    fn min_est_nonfailing(&self, task: usize) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for vm in 0..self.spec.pool.len() {
            if self.trace.is_failing(vm) {
                continue;
            }
            let ready = self.arrival(task, vm).unwrap_or(self.now).max(self.now);
            let dur = self.cp().wall_time(self.spec.workflow.task(task).runtimes[vm], 0);
            let est = find_slot(&self.reservations(vm), ready, dur);
            if best.is_none_or(|(_, b)| est < b) {
                best = Some((vm, est));
            }
        }
        best
    }

    fn move_to(&mut self, c: usize, vm: usize, est: f64) {
        let runtime = self.spec.workflow.task(self.copies[c].state.task).runtimes[vm];
        let l = &mut self.copies[c];
        l.state.vm = vm;
        l.state.alpha = 0;
        l.state.overhead = 0.0;
        l.state.executed = 0.0;
        l.state.status = Status::Pending;
        l.runtime = runtime;
        l.est = est;
        l.ready_at = Some(est);
        l.epoch += 1;
        let epoch = l.epoch;
        self.push(est, Ev::Ready(c, epoch));
    }

    fn resubmit(&mut self, c: usize, window: Interval) {
        let task = self.copies[c].state.task;
        let decision = decide_resubmission(
            self.copies[c].runtime,
            self.copies[c].state.alpha,
            self.cp().lambda,
            window,
            self.min_est_nonfailing(task),
        );
        self.resubmissions += 1;
        {
            let l = &mut self.copies[c];
            l.state.resubmitted = true;
            l.fail_time = self.now;
        }
        match decision {
            Decision::MoveTo { vm, est } => {
                self.log(EventKind::Resubmit, Some(c), Some(vm), format!("move est={est}"));
                self.move_to(c, vm, est);
            }
            Decision::StayUntil { resume, remaining } => {
                let vm = self.copies[c].state.vm;
                self.log(
                    EventKind::Resubmit,
                    Some(c),
                    Some(vm),
                    format!("stay resume={resume} remaining={remaining}"),
                );
                let l = &mut self.copies[c];
                l.state.status = Status::Pending;
                l.est = resume;
                l.ready_at = Some(resume);
                l.epoch += 1;
                let epoch = l.epoch;
                self.push(resume, Ev::Ready(c, epoch));
            }
        }
    }

    fn close_segment(&mut self, c: usize, outcome: SegmentEnd) {
        let l = &self.copies[c];
        self.segments.push(Segment {
            copy: c,
            vm: l.state.vm,
            start: l.seg_start,
            end: self.now,
            last_checkpoint: l.last_ckpt,
            outcome,
        });
        self.running[l.state.vm] = None;
    }

    fn fail(&mut self, c: usize, window: Interval, reason: &str) {
        let vm = self.copies[c].state.vm;
        if self.copies[c].state.status == Status::Running {
            self.copies[c].epoch += 1;
            self.close_segment(c, SegmentEnd::Failed);
        }
        self.copies[c].state.status = Status::Failed;
        let task = self.copies[c].state.task;
        self.failures[task] += 1;
        self.log(EventKind::CopyFailed, Some(c), Some(vm), reason);
        if self.winner[task].is_none() && !self.other_alive(task, c) {
            if self.cfg.resubmit {
                self.resubmit(c, window);
            } else if self.error.is_none() {
                self.error = Some(format!(
                    "workflow incomplete: every copy of {} failed",
                    self.spec.workflow.task(task).id
                ));
            }
        }
    }

    fn on_ready(&mut self, c: usize) {
        let vm = self.copies[c].state.vm;
        let task = self.copies[c].state.task;
        self.copies[c].ready_at = None;
        if let Some(window) = self.trace.containing(vm, self.now) {
            self.fail(c, window, "vm down at start");
            return;
        }
        if self.running[vm].is_some() {
            let last = !self.other_alive(task, c);
            if last || !self.cfg.busy_as_failure {
                self.copies[c].state.status = Status::Waiting;
                self.queue[vm].push(c);
                self.log(EventKind::WaitBusy, Some(c), Some(vm), "");
            } else {
                self.copies[c].state.status = Status::Failed;
                self.failures[task] += 1;
                self.log(EventKind::CopyFailed, Some(c), Some(vm), "vm busy");
            }
            return;
        }
        self.copies[c].state.status = Status::Waiting;
        self.queue[vm].push(c);
        self.push(self.now, Ev::Dispatch(vm));
    }

    fn dispatch_key(&self, c: usize) -> (u8, f64, &str, usize) {
        let l = &self.copies[c];
        let id = self.spec.workflow.task(l.state.task).id.as_str();
        if l.state.resubmitted {
            (0, l.fail_time, id, l.state.ordinal)
        } else {
            (1, l.est, id, l.state.ordinal)
        }
    }

    fn on_dispatch(&mut self, vm: usize) {
        if self.running[vm].is_some() || self.trace.is_down(vm, self.now) {
            return;
        }
        self.queue[vm].retain(|&c| self.copies[c].state.status == Status::Waiting && self.copies[c].state.vm == vm);
        let Some(&c) = self.queue[vm].iter().min_by(|&&a, &&b| {
            let (ka, kb) = (self.dispatch_key(a), self.dispatch_key(b));
            ka.0.cmp(&kb.0)
                .then(ka.1.total_cmp(&kb.1))
                .then(ka.2.cmp(kb.2))
                .then(ka.3.cmp(&kb.3))
        }) else {
            return;
        };
        self.queue[vm].retain(|&x| x != c);

        // a resubmitted copy is never started into a known downtime
        if self.copies[c].state.resubmitted && self.trace.is_failing(vm) {
            let end = self.now + self.remaining_wall(c);
            if let Some((x, _)) = self.trace.next_down(vm, self.now) {
                if x < end {
                    self.copies[c].state.status = Status::Pending;
                    if let Some((to, est)) = self.min_est_nonfailing(self.copies[c].state.task) {
                        self.log(EventKind::Resubmit, Some(c), Some(to), format!("reroute est={est}"));
                        self.move_to(c, to, est);
                        self.push(self.now, Ev::Dispatch(vm));
                        return;
                    }
                    self.copies[c].state.status = Status::Waiting;
                }
            }
        }
        self.start(c);
    }

    fn start(&mut self, c: usize) {
        let cp = self.cp();
        let now = self.now;
        let l = &mut self.copies[c];
        l.state.status = Status::Running;
        l.state.ast.get_or_insert(now);
        l.seg_start = now;
        l.last_ckpt = now;
        let alpha = l.state.alpha;
        let k = cp.checkpoints_in(l.runtime);
        l.seg_end = now + cp.wall_time(l.runtime, alpha);
        l.epoch += 1;
        let (epoch, vm, end, runtime) = (l.epoch, l.state.vm, l.seg_end, l.runtime);
        self.running[vm] = Some(c);
        for j in (alpha + 1)..=k {
            if (j as f64) * cp.lambda < runtime {
                let t = now + (j - alpha) as f64 * (cp.lambda + cp.gamma);
                self.push(t, Ev::Checkpoint(c, epoch));
            }
        }
        self.push(end, Ev::Complete(c, epoch));
        self.log(EventKind::Start, Some(c), Some(vm), "");
    }

    fn on_checkpoint(&mut self, c: usize) {
        let (lambda, gamma) = (self.cp().lambda, self.cp().gamma);
        let now = self.now;
        let l = &mut self.copies[c];
        l.state.alpha += 1;
        l.state.overhead += gamma;
        l.state.executed = l.state.alpha as f64 * lambda;
        l.last_ckpt = now;
        let vm = l.state.vm;
        self.log(EventKind::Checkpoint, Some(c), Some(vm), "");
    }

    fn on_complete(&mut self, c: usize) {
        let cp = self.cp();
        let now = self.now;
        let (task, vm) = {
            let l = &mut self.copies[c];
            let k = cp.checkpoints_in(l.runtime);
            l.state.overhead += k.saturating_sub(l.state.alpha) as f64 * cp.gamma;
            l.state.alpha = k;
            l.state.executed = l.runtime;
            l.state.status = Status::Done;
            l.state.aft = Some(now);
            (l.state.task, l.state.vm)
        };
        self.close_segment(c, SegmentEnd::Completed);
        self.log(EventKind::Complete, Some(c), Some(vm), "");
        self.done[task].push(c);

        if self.winner[task].is_none() {
            self.winner[task] = Some(c);
            let handle = self.store.len() as u64 + 1;
            self.store.insert(
                task,
                StoreEntry {
                    vm,
                    handle,
                    replicated: self.trace.is_failing(vm),
                },
            );
            let siblings: Vec<usize> = self.by_task[task].clone();
            for s in siblings {
                let st = self.copies[s].state.status;
                if matches!(st, Status::Pending | Status::Waiting) {
                    let l = &mut self.copies[s];
                    l.state.status = Status::Terminated;
                    l.epoch += 1;
                    l.ready_at = None;
                    let svm = l.state.vm;
                    self.log(EventKind::TerminateReplica, Some(s), Some(svm), "sibling finished");
                }
            }
        }
        let children: Vec<usize> = self.spec.workflow.children(task).iter().map(|e| e.task).collect();
        for child in children {
            for k in self.by_task[child].clone() {
                self.schedule_ready(k);
            }
        }
        self.push(now, Ev::Dispatch(vm));
    }

    fn finished(&self) -> bool {
        self.winner.iter().all(Option::is_some) && self.running.iter().all(Option::is_none)
    }

    fn run(&mut self) {
        let horizon = self.trace.horizon;
        while let Some(Reverse(item)) = self.heap.pop() {
            if item.time > horizon {
                break;
            }
            self.now = item.time;
            match item.ev {
                Ev::Complete(c, e) if self.copies[c].epoch == e && self.copies[c].state.status == Status::Running => {
                    self.on_complete(c)
                }
                Ev::Checkpoint(c, e) if self.copies[c].epoch == e && self.copies[c].state.status == Status::Running => {
                    self.on_checkpoint(c)
                }
                Ev::Ready(c, e) if self.copies[c].epoch == e && self.copies[c].state.status == Status::Pending => {
                    self.on_ready(c)
                }
                Ev::VmDown(vm, i) => {
                    let window = self.trace.downtimes[vm][i];
                    self.log(EventKind::VmDown, None, Some(vm), format!("until {}", window.1));
                    if let Some(c) = self.running[vm] {
                        self.fail(c, window, "vm went down");
                    }
                }
                Ev::VmUp(vm) => {
                    self.log(EventKind::VmUp, None, Some(vm), "");
                    self.push(self.now, Ev::Dispatch(vm));
                }
                Ev::Dispatch(vm) => self.on_dispatch(vm),
                _ => {}
            }
            if self.finished() {
                break;
            }
        }
        // only copies whose completion lies past the horizon are still running
        for vm in 0..self.running.len() {
            if let Some(c) = self.running[vm] {
                self.now = horizon;
                self.close_segment(c, SegmentEnd::Truncated);
            }
        }
    }
}

/// Replays `schedule` against `trace`. Copies never start before their
/// planned start; each VM runs one copy at a time.
pub fn simulate(
    schedule: &Schedule,
    trace: &FailureTrace,
    cfg: &SimConfig,
    spec: &WorkflowSpec,
) -> Result<ExecutionLog, SimError> {
    cfg.checkpoint.validate()?;
    if trace.downtimes.len() != spec.pool.len() {
        return Err(SimError::TraceShape {
            trace: trace.downtimes.len(),
            pool: spec.pool.len(),
        });
    }
    if schedule.task_count() != spec.workflow.len() {
        return Err(SimError::ScheduleShape {
            schedule: schedule.task_count(),
            workflow: spec.workflow.len(),
        });
    }
    let makespan = schedule.tet_perfect();
    if makespan > trace.horizon {
        return Err(SimError::Horizon {
            makespan,
            horizon: trace.horizon,
        });
    }

    let n_tasks = spec.workflow.len();
    let n_vms = spec.pool.len();
    let copies: Vec<Live> = schedule
        .placements()
        .iter()
        .map(|p| Live {
            state: CopyState {
                task: p.task,
                ordinal: p.ordinal,
                status: Status::Pending,
                vm: p.vm,
                ast: None,
                aft: None,
                alpha: 0,
                overhead: 0.0,
                executed: 0.0,
                resubmitted: false,
            },
            est: p.est,
            runtime: spec.workflow.task(p.task).runtimes[p.vm],
            epoch: 0,
            fail_time: 0.0,
            ready_at: None,
            seg_start: 0.0,
            seg_end: 0.0,
            last_ckpt: 0.0,
        })
        .collect();
    let by_task = (0..n_tasks).map(|t| schedule.copies_of(t).to_vec()).collect();

    let mut eng = Engine {
        spec,
        trace,
        cfg: *cfg,
        now: 0.0,
        heap: BinaryHeap::new(),
        seq: 0,
        copies,
        by_task,
        running: vec![None; n_vms],
        queue: vec![Vec::new(); n_vms],
        winner: vec![None; n_tasks],
        done: vec![Vec::new(); n_tasks],
        failures: vec![0; n_tasks],
        events: Vec::new(),
        segments: Vec::new(),
        store: GlobalStore::new(),
        resubmissions: 0,
        error: None,
    };
    for (vm, list) in trace.downtimes.iter().enumerate() {
        for (i, &(x, y)) in list.iter().enumerate() {
            eng.push(x, Ev::VmDown(vm, i));
            eng.push(y, Ev::VmUp(vm));
        }
    }
    for c in 0..eng.copies.len() {
        eng.schedule_ready(c);
    }
    eng.run();

    let completed = eng.winner.iter().all(Option::is_some);
    let mut error = eng.error.take();
    if !completed && error.is_none() {
        error = Some("workflow incomplete: horizon reached".into());
    }
    let finish = eng
        .winner
        .iter()
        .map(|w| w.and_then(|c| eng.copies[c].state.aft))
        .collect();
    Ok(ExecutionLog {
        events: eng.events,
        copies: eng.copies.into_iter().map(|l| l.state).collect(),
        segments: eng.segments,
        failures: eng.failures,
        store: eng.store,
        completed,
        error,
        finish,
        winners: eng.winner,
        resubmissions: eng.resubmissions,
        horizon: trace.horizon,
        checkpoint: cfg.checkpoint,
    })
}
