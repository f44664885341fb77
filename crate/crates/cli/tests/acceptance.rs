//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::collections::HashMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crch_core::clusterrep::{affinity, pca, replication_plan, triplet_score, ClusterConfig, Point, ReplicationPlan};
use crch_core::experiment::{run, Algorithm, ExperimentConfig, LambdaChoice, Report, WorkflowSource};
use crch_core::faults::{Environment, EnvironmentProfile, FailureTrace};
use crch_core::features::{standardize, FeatureMatrix};
use crch_core::ingest::{generate, parse_native, Family, GeneratorConfig, Metadata, WorkflowSpec};
use crch_core::metrics::{argmin_lambda, compute, lambda_sweep};
use crch_core::model::{Dependency, ResourcePool, Task, Vm, Workflow};
use crch_core::scheduler::{heft, overprovision};
use crch_core::simruntime::{decide_resubmission, simulate, CheckpointConfig, Decision, SimConfig};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn f1() -> WorkflowSpec {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/f1.json");
    parse_native(&std::fs::read(path).unwrap()).unwrap()
}

// ---------------------------------------------------------------- criterion 1

/// Small DAG with integer-valued costs so rank and placement ties occur.
fn random_dag(rng: &mut ChaCha8Rng, idx: usize) -> WorkflowSpec {
    let n = rng.random_range(1..=6);
    let m = rng.random_range(1..=3);
    let tasks = (0..n)
        .map(|i| Task::new(format!("t{i}"), (0..m).map(|_| rng.random_range(1..=5) as f64).collect()))
        .collect();
    let mut deps = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(0.4) {
                deps.push(Dependency::new(format!("t{i}"), format!("t{j}"), rng.random_range(0..=4) as f64));
            }
        }
    }
    let vms = (0..m)
        .map(|i| Vm {
            id: format!("v{i}"),
            reliable: i == 0,
        })
        .collect();
    let rates = (0..m)
        .map(|r| (0..m).map(|s| if r == s { 1.0 } else { [1.0, 2.0][rng.random_range(0..2)] }).collect())
        .collect();
    let meta = Metadata {
        name: format!("dag{idx}"),
        family: "random".into(),
        size: n,
    };
    WorkflowSpec::new(Workflow::new(tasks, deps), ResourcePool::new(vms, rates), meta).unwrap()
}

struct OracleSchedule {
    /// (vm, est, eft) per task.
    slots: Vec<(usize, f64, f64)>,
    makespan: f64,
}

/// Enumerates every VM assignment, laying tasks out in descending b-level
/// order with gap insertion, and keeps the assignment whose per-step
/// (EST, EFT, VM) sequence is lexicographically smallest.
fn heft_oracle(spec: &WorkflowSpec) -> OracleSchedule {
    let w = &spec.workflow;
    let n = w.len();
    let m = spec.pool.len();
    let rate = |a: usize, b: usize| spec.pool.rates()[a][b];
    let xfer = |d: f64, a: usize, b: usize| if a == b || d == 0.0 { 0.0 } else { d / rate(a, b) };
    let mean_xfer = |d: f64| {
        if m < 2 || d == 0.0 {
            return 0.0;
        }
        let mut s = 0.0;
        for a in 0..m {
            for b in 0..m {
                if a != b {
                    s += d / rate(a, b);
                }
            }
        }
        s / (m * (m - 1)) as f64
    };
    fn blevel(t: usize, w: &Workflow, mx: &dyn Fn(f64) -> f64, memo: &mut HashMap<usize, f64>) -> f64 {
        if let Some(&b) = memo.get(&t) {
            return b;
        }
        let mut tail: f64 = 0.0;
        for e in w.children(t) {
            tail = tail.max(mx(e.data) + blevel(e.task, w, mx, memo));
        }
        let b = w.task(t).mean_runtime() + tail;
        memo.insert(t, b);
        b
    }
    let mut memo = HashMap::new();
    let b: Vec<f64> = (0..n).map(|t| blevel(t, w, &mean_xfer, &mut memo)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| b[y].total_cmp(&b[x]).then(w.task(x).id.cmp(&w.task(y).id)));

    // (per-step keys, per-task slots) of the best assignment so far
    type Candidate = (Vec<(f64, f64, usize)>, Vec<(usize, f64, f64)>);
    let mut best: Option<Candidate> = None;
    let total = m.pow(n as u32);
    for code in 0..total {
        let mut c = code;
        let mut vm_of = vec![0; n];
        for &t in &order {
            vm_of[t] = c % m;
            c /= m;
        }
        let mut slots: Vec<Option<(usize, f64, f64)>> = vec![None; n];
        let mut busy: Vec<Vec<(f64, f64)>> = vec![Vec::new(); m];
        let mut keys = Vec::with_capacity(n);
        for &t in &order {
            let v = vm_of[t];
            let ready = w
                .parents(t)
                .iter()
                .map(|e| {
                    let (pv, _, pf) = slots[e.task].expect("parents rank higher");
                    pf + xfer(e.data, pv, v)
                })
                .fold(0.0, f64::max);
            let dur = w.task(t).runtimes[v];
            let fits = |s: f64| busy[v].iter().all(|&(a, z)| s + dur <= a || s >= z);
            let mut cands: Vec<f64> = std::iter::once(ready)
                .chain(busy[v].iter().map(|&(_, z)| z).filter(|&z| z >= ready))
                .collect();
            cands.sort_by(f64::total_cmp);
            let est = cands.into_iter().find(|&s| fits(s)).expect("appending always fits");
            busy[v].push((est, est + dur));
            slots[t] = Some((v, est, est + dur));
            keys.push((est, est + dur, v));
        }
        let better = match &best {
            None => true,
            Some((bk, _)) => {
                keys.iter()
                    .zip(bk)
                    .map(|(a, b)| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)))
                    .find(|o| o.is_ne())
                    == Some(std::cmp::Ordering::Less)
            }
        };
        if better {
            best = Some((keys, slots.into_iter().map(Option::unwrap).collect()));
        }
    }
    let slots = best.unwrap().1;
    let makespan = slots.iter().map(|s| s.2).fold(0.0, f64::max);
    OracleSchedule { slots, makespan }
}

fn heft_matches_oracle(spec: &WorkflowSpec) -> Result<(), String> {
    let s = heft(spec);
    let o = heft_oracle(spec);
    for t in 0..spec.workflow.len() {
        let p = s.original(t);
        let got = (p.vm, p.est, p.eft);
        ensure(got == o.slots[t], || {
            format!("{}: task {t} heft {got:?} oracle {:?}", spec.metadata.name, o.slots[t])
        })?;
    }
    ensure(s.tet_perfect() == o.makespan, || {
        format!("{}: makespan {} vs oracle {}", spec.metadata.name, s.tet_perfect(), o.makespan)
    })
}

fn criterion_1() -> Outcome {
    let spec = f1();
    heft_matches_oracle(&spec)?;
    ensure(heft(&spec).tet_perfect() == 7.0, || "F1 makespan is not 7".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    for i in 0..50 {
        heft_matches_oracle(&random_dag(&mut rng, i))?;
    }
    Ok("F1 and 50 random DAGs match the exhaustive oracle".into())
}

// ---------------------------------------------------------------- criterion 2

fn naive_affinity(a: &[Point], b: &[Point]) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for p in a {
        for q in b {
            let mut sq = 0.0;
            for d in 0..p.len() {
                sq += (p[d] - q[d]) * (p[d] - q[d]);
            }
            total += sq.sqrt();
            count += 1;
        }
    }
    total / count as f64
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC2);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let dims = rng.random_range(1..=5);
        let points = rng.random_range(3..=50);
        let pts: Vec<Point> = (0..points)
            .map(|_| (0..dims).map(|_| rng.random_range(-10.0..10.0)).collect())
            .collect();
        // cut into 3..=6 contiguous clusters
        let k = rng.random_range(3..=points.min(6));
        let mut cuts: Vec<usize> = rand::seq::index::sample(&mut rng, points - 1, k - 1)
            .into_iter()
            .map(|c| c + 1)
            .collect();
        cuts.sort_unstable();
        let mut clusters: Vec<Vec<Point>> = Vec::new();
        let mut prev = 0;
        for c in cuts.into_iter().chain(std::iter::once(points)) {
            clusters.push(pts[prev..c].to_vec());
            prev = c;
        }
        let (i, rest) = clusters.split_first().unwrap();
        for j in rest {
            let got = affinity(i, j).map_err(|e| e.to_string())?;
            worst = worst.max((got - naive_affinity(i, j)).abs());
        }
        let neighbours: Vec<&[Point]> = rest.iter().map(|c| c.as_slice()).collect();
        let margin = rng.random_range(0.0..2.0);
        for j in rest {
            let d_ij = naive_affinity(i, j);
            let mut sum = 0.0;
            for k in rest {
                sum += d_ij - naive_affinity(i, k);
            }
            let want = d_ij + margin / (rest.len() - 1) as f64 * sum;
            let got = triplet_score(i, j, &neighbours, margin).map_err(|e| e.to_string())?;
            worst = worst.max((got - want).abs());
        }
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("200 point sets, max deviation {worst:.1e}"))
}

// ---------------------------------------------------------------- criterion 3

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
    for case in 0..100 {
        let rows = rng.random_range(4..40);
        let cols = rng.random_range(2..=6);
        let raw: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..cols).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        let m = standardize(&FeatureMatrix::new((0..cols).map(|c| format!("f{c}")).collect(), raw));
        let thr = rng.random_range(0.05..=1.0);
        let r = pca(&m, thr).map_err(|e| e.to_string())?;
        for (a, ca) in r.components.iter().enumerate() {
            for (b, cb) in r.components.iter().enumerate() {
                let dot: f64 = ca.iter().zip(cb).map(|(x, y)| x * y).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                ensure((dot - want).abs() <= 1e-9, || format!("case {case}: <c{a},c{b}> = {dot}"))?;
            }
        }
        ensure(r.explained.windows(2).all(|w| w[0] >= w[1]), || {
            format!("case {case}: explained variance increases {:?}", r.explained)
        })?;
        ensure(r.cumulative() >= thr - 1e-12, || {
            format!("case {case}: coverage {} below {thr}", r.cumulative())
        })?;
    }
    let xs: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..10.0)).collect();
    let corr: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x, 2.0 * x + rng.random_range(-0.1..0.1)]).collect();
    let m = standardize(&FeatureMatrix::new(vec!["x".into(), "y".into()], corr));
    let r = pca(&m, 0.8).map_err(|e| e.to_string())?;
    ensure(r.components.len() == 1, || format!("correlated case kept {} components", r.components.len()))?;
    Ok("100 matrices orthonormal, ordered and covering; correlated 2-D keeps 1 component".into())
}

// ---------------------------------------------------------------- criterion 4

fn criterion_4() -> Outcome {
    let profile = EnvironmentProfile::defaults(Environment::None);
    let cfg = SimConfig::new(CheckpointConfig::fixed(1.0, 0.0).unwrap(), &profile, true);
    for i in 0..50u64 {
        let family = Family::ALL[i as usize % Family::ALL.len()];
        let spec = generate(&GeneratorConfig::new(family, 10 + (i as usize * 7) % 60, 2 + i as usize % 9, i));
        let plan = if i % 2 == 0 {
            ReplicationPlan::all_ones(spec.workflow.len())
        } else {
            ReplicationPlan::uniform(spec.workflow.len(), 2)
        };
        let s = overprovision(&spec, &plan);
        let trace = FailureTrace::empty(spec.pool.len(), 1e6);
        let log = simulate(&s, &trace, &cfg, &spec).map_err(|e| e.to_string())?;
        for (c, p) in log.copies.iter().zip(s.placements()) {
            // a losing replica that was still pending is terminated and never runs
            if c.ast.is_none() {
                continue;
            }
            ensure(c.ast == Some(p.est) && c.aft == Some(p.eft), || {
                format!("workflow {i}: copy ran {:?}..{:?}, planned {}..{}", c.ast, c.aft, p.est, p.eft)
            })?;
        }
        for t in 0..spec.workflow.len() {
            let o = &log.copies[s.copies_of(t)[0]];
            ensure(o.ast == Some(s.original(t).est), || {
                format!("workflow {i}: original of task {t} did not run as planned")
            })?;
        }
        let m = compute(&log, &s, &spec).map_err(|e| e.to_string())?;
        // with every copy running as planned, each task finishes with its earliest copy
        let want = (0..spec.workflow.len())
            .map(|t| s.copies_of(t).iter().map(|&c| s.placements()[c].eft).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max);
        ensure(log.completed && m.tet == want, || format!("workflow {i}: tet {} expected {want}", m.tet))?;
        if i % 2 == 0 {
            ensure(m.wastage == 0.0, || format!("workflow {i}: wastage {}", m.wastage))?;
        }
    }
    Ok("50 generated workflows replay exactly; wastage 0 without replicas".into())
}

// ---------------------------------------------------------------- criterion 5

fn criterion_5() -> Outcome {
    let spec = generate(&GeneratorConfig::new(Family::Montage, 40, 8, 5));
    let s = overprovision(&spec, &ReplicationPlan::uniform(spec.workflow.len(), 2));
    let (lambda, gamma) = (2.0, 0.25);
    let mut checked = 0;
    for env in [Environment::None, Environment::Stable, Environment::Unstable] {
        let profile = EnvironmentProfile::defaults(env);
        let cfg = SimConfig::new(CheckpointConfig::fixed(lambda, gamma).unwrap(), &profile, true);
        let trace = crch_core::faults::build_trace(&profile, &spec.pool, 2000.0, 11).map_err(|e| e.to_string())?;
        let log = simulate(&s, &trace, &cfg, &spec).map_err(|e| e.to_string())?;
        for (i, c) in log.copies.iter().enumerate() {
            let want = (c.executed / lambda).floor() * gamma;
            ensure(c.overhead == want, || {
                format!("{env}: copy {i} executed {} charged {} expected {want}", c.executed, c.overhead)
            })?;
            checked += 1;
        }
    }
    let plan = ReplicationPlan::all_ones(spec.workflow.len());
    let none = EnvironmentProfile::defaults(Environment::None);
    let curve = lambda_sweep(&spec, &plan, &none, &[2.0, 1.0], 0.05, &[1, 2]).map_err(|e| e.to_string())?;
    let ratio = curve[1].co / curve[0].co;
    ensure((ratio - 2.0).abs() <= 1e-9, || format!("halving lambda scaled CO by {ratio}"))?;
    Ok(format!("{checked} copies charged floor(executed/lambda)*gamma; CO ratio {ratio:.12}"))
}

// ---------------------------------------------------------------- criterion 6

fn criterion_6() -> Outcome {
    let alpha = CheckpointConfig::fixed(2.0, 0.0).unwrap().checkpoints_in(7.0);
    ensure(alpha == 3, || format!("alpha {alpha}"))?;
    let moved = decide_resubmission(10.0, alpha, 2.0, (7.0, 20.0), Some((1, 5.0)));
    ensure(moved == Decision::MoveTo { vm: 1, est: 5.0 }, || format!("Y=20: {moved:?}"))?;
    let stayed = decide_resubmission(10.0, alpha, 2.0, (7.0, 9.0), Some((1, 5.0)));
    ensure(stayed == Decision::StayUntil { resume: 9.0, remaining: 4.0 }, || format!("Y=9: {stayed:?}"))?;
    for (est, moves) in [(8.5, true), (9.0, false), (9.5, false)] {
        let d = decide_resubmission(10.0, 0, 2.0, (7.0, 9.0), Some((1, est)));
        ensure(matches!(d, Decision::MoveTo { .. }) == moves, || format!("alpha 0, minEST {est}: {d:?}"))?;
    }
    Ok("move at Y=20, stay with 4 remaining at Y=9, alpha=0 moves iff minEST < Y".into())
}

// ---------------------------------------------------------------- criteria 7, 8

const ALGS: [Algorithm; 3] = [Algorithm::Heft, Algorithm::Crch, Algorithm::ReplicateAll(3)];

fn desk_config(seed: u64) -> ExperimentConfig {
    let mut g = GeneratorConfig::new(Family::LayeredRandom, 100, 20, seed);
    g.reliable = 4;
    ExperimentConfig {
        source: WorkflowSource::Generate(g),
        vms: 20,
        reliable: 4,
        environments: Environment::FAILING.to_vec(),
        algorithms: ALGS.to_vec(),
        reps: 10,
        seed,
        lambda: LambdaChoice::Auto,
        gamma: 0.05,
        clustering: ClusterConfig::default(),
        out_dir: None,
    }
}

const DESK_SEEDS: [u64; 3] = [1, 2, 3];

fn desk_reports() -> Result<Vec<Report>, String> {
    DESK_SEEDS.iter().map(|&s| run(&desk_config(s)).map_err(|e| e.to_string())).collect()
}

fn criterion_7(reports: &[Report]) -> Outcome {
    let mut notes = Vec::new();
    for (seed, r) in DESK_SEEDS.iter().zip(reports) {
        let get = |a: &str, e| r.summary(a, e).unwrap();
        for env in Environment::FAILING {
            let (h, c, ra) = (get("heft", env), get("crch", env), get("replicate-all:3", env));
            if env != Environment::Unstable {
                ensure(h.usage.mean < c.usage.mean && c.usage.mean < ra.usage.mean, || {
                    format!(
                        "seed {seed} {env}: usage heft {:.1} crch {:.1} ra3 {:.1}",
                        h.usage.mean, c.usage.mean, ra.usage.mean
                    )
                })?;
            }
            ensure(c.wastage.mean <= 0.8 * ra.wastage.mean, || {
                format!("seed {seed} {env}: wastage crch {:.1} ra3 {:.1}", c.wastage.mean, ra.wastage.mean)
            })?;
            notes.push(c.wastage.mean / ra.wastage.mean);
        }
        let (h, c) = (get("heft", Environment::Unstable), get("crch", Environment::Unstable));
        ensure(c.completion_rate == 1.0 && h.completion_rate < 1.0, || {
            format!(
                "seed {seed} unstable: completion crch {} heft {}",
                c.completion_rate, h.completion_rate
            )
        })?;
    }
    let worst = notes.iter().cloned().fold(0.0, f64::max);
    Ok(format!(
        "{} workflows x 3 environments ordered; worst wastage ratio crch/ra3 {worst:.2}",
        reports.len()
    ))
}

fn criterion_8(reports: &[Report]) -> Outcome {
    let mut ratios = Vec::new();
    for (seed, r) in DESK_SEEDS.iter().zip(reports) {
        let slr = |a: &str| r.summary(a, Environment::Stable).unwrap().slr.mean;
        let ratio = slr("crch") / slr("heft");
        ensure(ratio <= 1.25, || format!("seed {seed}: SLR ratio {ratio:.3}"))?;
        ratios.push(ratio);
    }
    // completed HEFT runs only, for context
    let completed: Vec<f64> = reports
        .iter()
        .filter_map(|r| {
            let ok: Vec<f64> = r
                .runs
                .iter()
                .filter(|x| x.algorithm == "heft" && x.environment == Environment::Stable && x.metrics.completed)
                .map(|x| x.metrics.slr)
                .collect();
            let crch = r.summary("crch", Environment::Stable)?.slr.mean;
            (!ok.is_empty()).then(|| crch / (ok.iter().sum::<f64>() / ok.len() as f64))
        })
        .collect();
    Ok(format!("stable SLR ratios {ratios:.3?}; against completed HEFT runs only {completed:.3?}"))
}

// ---------------------------------------------------------------- criterion 9

fn criterion_9() -> Outcome {
    let mut g = GeneratorConfig::new(Family::LayeredRandom, 100, 20, 1);
    g.reliable = 4;
    let spec = generate(&g);
    let plan = replication_plan(&spec, &ClusterConfig::default()).map_err(|e| e.to_string())?;
    let grid = [0.5, 1.0, 2.0, 4.0, 8.0];
    let seeds: Vec<u64> = (0..20).collect();
    let mut best = Vec::new();
    let mut curves = Vec::new();
    for env in [Environment::Stable, Environment::Unstable] {
        let curve = lambda_sweep(&spec, &plan, &EnvironmentProfile::defaults(env), &grid, 0.05, &seeds)
            .map_err(|e| e.to_string())?;
        best.push(argmin_lambda(&curve).unwrap());
        let tets: Vec<String> = curve.iter().map(|p| format!("{:.2}", p.mean_tet)).collect();
        curves.push(format!("{env} [{}]", tets.join(" ")));
    }
    ensure(best[0] >= best[1], || format!("argmin stable {} < unstable {}", best[0], best[1]))?;
    Ok(format!(
        "argmin lambda stable {} >= unstable {}; mean TET over the grid: {}",
        best[0],
        best[1],
        curves.join(", ")
    ))
}

// --------------------------------------------------------------- criterion 10

fn cli(args: &[&str], seed_env: Option<&str>) -> Result<Vec<u8>, String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_crch"));
    cmd.args(args).env_remove("CRCH_SEED");
    if let Some(s) = seed_env {
        cmd.env("CRCH_SEED", s);
    }
    let out = cmd.output().map_err(|e| e.to_string())?;
    ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
    Ok(out.stdout)
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let f1 = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/f1.json");
    let f1 = f1.to_str().unwrap();
    let invocations: Vec<Vec<&str>> = vec![
        vec!["run", "--workflow", f1, "--env", "stable", "--alg", "heft", "--reps", "1", "--seed", "7"],
        vec!["run", "--generate", "layered-random:60", "--reps", "3", "--seed", "42"],
        vec!["run", "--generate", "montage:40", "--vms", "8", "--reliable", "2", "--env", "unstable", "--lambda", "1.5", "--reps", "4"],
    ];
    for args in &invocations {
        let a = cli(args, None)?;
        let b = cli(args, None)?;
        ensure(!a.is_empty() && a == b, || format!("stdout differs for {args:?}"))?;
    }
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        cli(&["run", "--generate", "sipht:30", "--reps", "2", "--out", out.to_str().unwrap()], None)?;
    }
    for name in ["runs.csv", "summary.json"] {
        let a = std::fs::read(out_a.join(name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(out_b.join(name)).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{name} differs between identical runs"))?;
    }
    let base = ["run", "--generate", "ligo:30", "--reps", "2", "--seed", "9"];
    let overridden = cli(&base, Some("5"))?;
    let direct = cli(&["run", "--generate", "ligo:30", "--reps", "2", "--seed", "5"], None)?;
    ensure(overridden == direct, || "CRCH_SEED did not override --seed".into())?;
    Ok(format!("{} invocations byte-identical, output files identical, CRCH_SEED honoured", invocations.len() + 1))
}

// ---------------------------------------------------------------------- main

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, limit: Option<Duration>, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let mut outcome = f();
        let took = start.elapsed();
        if let (Ok(_), Some(limit)) = (&outcome, limit) {
            if took > limit {
                outcome = Err(format!("took {took:.1?}, limit {limit:?}"));
            }
        }
        match outcome {
            Ok(msg) => println!("PASS criterion {n}: {msg} ({took:.2?})"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {n}: {msg} ({took:.2?})");
            }
        }
    };
    let secs = |s| Some(Duration::from_secs(s));
    report(1, secs(30), &mut criterion_1);
    report(2, secs(10), &mut criterion_2);
    report(3, None, &mut criterion_3);
    report(4, None, &mut criterion_4);
    report(5, None, &mut criterion_5);
    report(6, None, &mut criterion_6);

    let start = Instant::now();
    let desk = desk_reports();
    let desk_time = start.elapsed();
    report(7, secs(300), &mut || {
        if desk_time > Duration::from_secs(300) {
            return Err(format!("desk experiment took {desk_time:.1?}"));
        }
        desk.as_ref()
            .map_err(Clone::clone)
            .and_then(|r| criterion_7(r))
            .map(|m| format!("{m}; experiment took {desk_time:.2?}"))
    });
    report(8, None, &mut || desk.as_ref().map_err(Clone::clone).and_then(|r| criterion_8(r)));
    report(9, secs(300), &mut criterion_9);
    report(10, None, &mut criterion_10);

    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 10 acceptance criteria passed");
}
