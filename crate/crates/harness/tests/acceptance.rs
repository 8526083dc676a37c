//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use footstep_core::geometry::{FootArray, FootId, RobotState, SwingPair, Vec2, VelocityCommand};
use footstep_core::models::{ablation_suite, fit, AffineModel, FeatureVariant, FULL_DIM};
use footstep_core::planner::{expand, plan, PlannerNode, PlannerParams, TerminalReason};
use footstep_core::sim::{propagate, swing_touchdowns, ControllerTransition, OracleParams};
use footstep_core::terrain::{
    compute_foot_costmap, distance_field, squared_distance_transform, CostmapParams, ElevationMap,
    FootCostmap,
};
use footstep_harness::collect::{collect, CollectSpec};
use footstep_harness::config::RunConfig;
use footstep_harness::experiment::{load_scenes, run_pipeline, run_scene};
use footstep_harness::report::{self, MetricsReport, TimeStats};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

// ---------------------------------------------------------------- 1

/// Coefficients of the noise-free dynamics, written out from the
/// simulator's update equations for the Full feature layout
/// `(v, v_prev, u, u_prev, LF, RF, LH, RH, flag)`.
fn expected_models(o: &OracleParams) -> [([[f64; FULL_DIM]; 2], [f64; 2]); 3] {
    let nm = o.p_neutral.mean();
    let nm = [nm.x, nm.y];
    let mut cvm = [[0.0; FULL_DIM]; 2];
    let mut cdm = [[0.0; FULL_DIM]; 2];
    let mut fdm = [[0.0; FULL_DIM]; 2];
    let (mut bv, mut bc, mut bf) = ([0.0; 2], [0.0; 2], [0.0; 2]);
    for k in 0..2 {
        // v' = a_com v + a_com_prev v_prev + a_ref u + a_ref_prev u_prev + kp (mean feet - mean neutral)
        cvm[k][k] = o.a_com;
        cvm[k][2 + k] = o.a_com_prev;
        cvm[k][4 + k] = o.a_ref;
        cvm[k][6 + k] = o.a_ref_prev;
        for foot in 0..4 {
            cvm[k][8 + 2 * foot + k] = o.k_posture / 4.0;
        }
        bv[k] = -o.k_posture * nm[k];
        // dc = T/2 (v + v')
        for j in 0..FULL_DIM {
            cdm[k][j] = o.t_half / 2.0 * cvm[k][j];
        }
        cdm[k][k] += o.t_half / 2.0;
        bc[k] = o.t_half / 2.0 * bv[k];
        // df = dc + k_v v' - k_r (mean feet - mean neutral)
        for j in 0..FULL_DIM {
            fdm[k][j] = cdm[k][j] + o.k_v * cvm[k][j];
        }
        for foot in 0..4 {
            fdm[k][8 + 2 * foot + k] -= o.k_r / 4.0;
        }
        bf[k] = bc[k] + o.k_v * bv[k] + o.k_r * nm[k];
    }
    [(fdm, bf), (cdm, bc), (cvm, bv)]
}

fn max_coef_error(m: &AffineModel, expected: &([[f64; FULL_DIM]; 2], [f64; 2])) -> f64 {
    let mut e: f64 = 0.0;
    for k in 0..2 {
        for j in 0..FULL_DIM {
            e = e.max((m.weights[k][j] - expected.0[k][j]).abs());
        }
        e = e.max((m.bias[k] - expected.1[k]).abs());
    }
    e
}

fn coefficient_recovery() -> Verdict {
    let t0 = Instant::now();
    let oracle = OracleParams::noise_free();
    let spec = CollectSpec {
        seed: 11,
        ..CollectSpec::default()
    };
    let log = collect(&spec, &oracle).unwrap();
    let set = fit(&log, FeatureVariant::Full, 1e-8, 3).unwrap();
    let exp = expected_models(&oracle);
    let coef = [&set.fdm, &set.cdm, &set.cvm]
        .iter()
        .zip(&exp)
        .map(|(m, e)| max_coef_error(m, e))
        .fold(0.0, f64::max);
    let t = &set.meta.test;
    let rmse = t.fdm.rmse.max(t.cdm.rmse).max(t.cvm.rmse);
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        log.len() >= 10_000 && coef < 1e-6 && rmse < 1e-9 && secs < 10.0,
        format!(
            "{} transitions, max |coef err| {coef:.2e} (< 1e-6), max test RMSE {rmse:.2e} (< 1e-9), {secs:.1} s (< 10 s)",
            log.len()
        ),
    )
}

// ---------------------------------------------------------------- 2

fn ablation_trend() -> Verdict {
    let oracle = OracleParams::default();
    let mut held = 0;
    let mut lines = Vec::new();
    for seed in 0..5u64 {
        let spec = CollectSpec {
            seed: 100 + seed,
            ..CollectSpec::default()
        };
        let log = collect(&spec, &oracle).unwrap();
        let ab = ablation_suite(&log, 1e-8, seed).unwrap();
        let full = ab.get(FeatureVariant::Full).unwrap();
        let nohist = ab.get(FeatureVariant::NoHistory).unwrap();
        let nofeet = ab.get(FeatureVariant::NoFeet).unwrap();
        let quad = ab.get(FeatureVariant::Quadratic).unwrap();
        let rm = |e: &footstep_core::models::ModelErrors| [e.fdm.rmse, e.cdm.rmse, e.cvm.rmse];
        let (f, h, n, q) = (rm(full), rm(nohist), rm(nofeet), rm(quad));
        let ok = (0..3).all(|i| h[i] > f[i] && n[i] > f[i] && q[i] >= 0.95 * f[i]);
        held += ok as usize;
        let ratio = |x: [f64; 3]| format!("{:.3}/{:.3}/{:.3}", x[0] / f[0], x[1] / f[1], x[2] / f[2]);
        lines.push(format!(
            "seed {seed}: NoHistory {} NoFeet {} Quadratic {}",
            ratio(h),
            ratio(n),
            ratio(q)
        ));
    }
    verdict(
        held >= 4,
        format!(
            "trend held on {held}/5 seeds (need >= 4); RMSE ratios to Full, FDM/CDM/CVM: {}",
            lines.join("; ")
        ),
    )
}

// ---------------------------------------------------------------- 3

fn brute_sq(targets: &[(f64, f64)], ix: usize, iy: usize) -> Option<f64> {
    targets
        .iter()
        .map(|&(x, y)| (x - ix as f64).powi(2) + (y - iy as f64).powi(2))
        .min_by(f64::total_cmp)
}

fn distance_transform_oracle() -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (w, h) = (50, 50);
    let mut mismatches = 0;
    let mut empty = 0;
    for _ in 0..200 {
        let density = rng.gen_range(0.0..0.3f64).powi(2);
        let mask: Vec<bool> = (0..w * h).map(|_| rng.gen_bool(density)).collect();
        empty += !mask.iter().any(|&m| m) as usize;
        let sq = squared_distance_transform(&mask, w, h);
        let meters = distance_field(&mask, w, h, 0.01);
        let targets: Vec<(f64, f64)> = (0..w * h)
            .filter(|&i| mask[i])
            .map(|i| ((i % w) as f64, (i / w) as f64))
            .collect();
        for iy in 0..h {
            for ix in 0..w {
                let i = iy * w + ix;
                let nearest = brute_sq(&targets, ix, iy);
                let ok_sq = match nearest {
                    Some(d) => sq[i] == d,
                    None => sq[i] >= 1e20,
                };
                // distance_field adds an unsafe ring just outside the grid
                let ring = [ix + 1, w - ix, iy + 1, h - iy].into_iter().min().unwrap() as f64;
                let inner = nearest.unwrap_or(f64::INFINITY);
                let expected = inner.min(ring * ring).sqrt() * 0.01;
                if !ok_sq || meters[i] != expected {
                    mismatches += 1;
                }
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        mismatches == 0 && secs < 5.0,
        format!("200 random 50x50 masks ({empty} empty), {mismatches} cell mismatches, {secs:.2} s (< 5 s)"),
    )
}

// ---------------------------------------------------------------- 4

fn random_costmap(rng: &mut ChaCha8Rng) -> FootCostmap {
    let mut map = ElevationMap::flat(Vec2::ZERO, 0.01, 260, 120);
    for _ in 0..rng.gen_range(0..6) {
        let x0 = rng.gen_range(70..250);
        let y0 = rng.gen_range(0..110);
        let (dx, dy) = (rng.gen_range(3..25), rng.gen_range(3..60));
        for iy in y0..(y0 + dy).min(120) {
            for ix in x0..(x0 + dx).min(260) {
                let i = map.index(ix, iy);
                map.heights[i] = None;
            }
        }
    }
    compute_foot_costmap(&map, CostmapParams::default()).unwrap()
}

/// Minimum of g + h over all terminal sequences, and the sequences
/// attaining it. A node is terminal when it is within the goal radius or
/// at depth N; nodes inside the goal radius are not expanded further.
fn enumerate(
    node: &PlannerNode,
    prefix: &mut Vec<usize>,
    models: &footstep_core::models::ModelSet,
    cm: &FootCostmap,
    params: &PlannerParams,
    goal: Vec2,
    best: &mut (f64, Vec<Vec<usize>>),
) {
    if node.h <= params.goal_radius || node.depth == params.horizon {
        let f = node.f();
        if f < best.0 {
            *best = (f, vec![prefix.clone()]);
        } else if f == best.0 {
            best.1.push(prefix.clone());
        }
        return;
    }
    for ci in 0..params.commands.len() {
        if let Ok(child) = expand(node, ci, models, cm, params, goal) {
            prefix.push(ci);
            enumerate(&child, prefix, models, cm, params, goal, best);
            prefix.pop();
        }
    }
}

fn planner_optimality() -> Verdict {
    let t0 = Instant::now();
    let oracle = OracleParams::noise_free();
    let models = oracle.exact_models();
    let grid = footstep_core::planner::default_commands();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = Vec::new();
    let mut terminals: BTreeMap<String, usize> = BTreeMap::new();
    for case in 0..50 {
        let cm = random_costmap(&mut rng);
        let horizon = 1 + case % 3;
        let m = rng.gen_range(2..=5);
        let mut commands = Vec::new();
        while commands.len() < m {
            let c = grid[rng.gen_range(0..grid.len())];
            if !commands.contains(&c) {
                commands.push(c);
            }
        }
        let params = PlannerParams {
            horizon,
            commands,
            c_step: 0.3,
            time_budget: None,
            max_expansions: 1_000_000,
            ..PlannerParams::default()
        };
        let v = rng.gen_range(0.0..1.0);
        let mut start = RobotState::at_rest(
            Vec2::new(rng.gen_range(0.4..0.8), rng.gen_range(0.45..0.75)),
            oracle.p_neutral,
        );
        start.v_com = Vec2::new(v, rng.gen_range(-0.1..0.1));
        start.v_com_prev = start.v_com;
        start.v_ref = Vec2::new(v, 0.0);
        start.v_ref_prev = start.v_ref;
        if rng.gen_bool(0.5) {
            start.swing_pair_next = SwingPair::DiagB;
        }
        let goal = Vec2::new(start.p_com_w.x + rng.gen_range(0.1..1.6), rng.gen_range(0.3..0.9));

        let p = plan(&start, goal, &models, &cm, &params).unwrap();
        *terminals.entry(format!("{:?}", p.terminal)).or_default() += 1;
        let root = PlannerNode::root(&start, goal, &params);
        let mut best = (f64::INFINITY, Vec::new());
        enumerate(&root, &mut Vec::new(), &models, &cm, &params, goal, &mut best);
        let ok = match p.terminal {
            TerminalReason::GoalReached | TerminalReason::HorizonReached => {
                let idx: Vec<usize> = p
                    .commands
                    .iter()
                    .map(|c| params.commands.iter().position(|x| x == c).unwrap())
                    .collect();
                p.cost == best.0 && best.1.contains(&idx)
            }
            TerminalReason::Exhausted => best.1.is_empty(),
            TerminalReason::Timeout => false,
        };
        if !ok {
            mismatches.push(format!("case {case}: plan {} vs enumeration {}", p.cost, best.0));
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        mismatches.is_empty() && secs < 30.0,
        format!(
            "50 costmaps, N in 1..=3, M in 2..=5 (c_step 0.3): {} mismatches {:?}, terminals {:?}, {secs:.2} s (< 30 s)",
            mismatches.len(),
            mismatches,
            terminals
        ),
    )
}

// ---------------------------------------------------------------- 5

fn frame_identity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut v = || Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let mut worst: f64 = 0.0;
    for i in 0..10_000 {
        let mut feet = FootArray::default();
        for f in FootId::ALL {
            feet[f] = v() * 0.5;
        }
        let pair = if i % 2 == 0 { SwingPair::DiagA } else { SwingPair::DiagB };
        let s = RobotState {
            p_com_w: v() * 5.0,
            v_com: v(),
            v_com_prev: v(),
            v_ref: v(),
            v_ref_prev: v(),
            p_foot_rel: feet,
            swing_pair_next: pair,
        };
        let tr = ControllerTransition {
            delta_com_b: v() * 0.3,
            delta_foot_b: v() * 0.3,
            v_com_next: v(),
            swing_pair: pair,
            contact_forces: [50.0; 4],
        };
        let cmd = VelocityCommand::new(0.5, 0.0);
        let next = propagate(&s, cmd, &tr);
        for f in FootId::ALL {
            let df = if pair.contains(f) { tr.delta_foot_b } else { Vec2::ZERO };
            let expected = s.p_foot_rel[f] + df - tr.delta_com_b;
            worst = worst.max((next.p_foot_rel[f] - expected).norm());
        }
    }
    verdict(
        worst <= 1e-12,
        format!("10000 random states, max deviation {worst:.2e} (tol 1e-12)"),
    )
}

// ---------------------------------------------------------------- 6, 7, 9, 10

fn deterministic_config(dir: &Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.output_dir = dir.to_path_buf();
    cfg.run.record_timing = false;
    cfg
}

fn scenario_success(m: &MetricsReport, dir: &Path, secs: f64) -> Verdict {
    let cfg = deterministic_config(dir);
    let scenes = load_scenes(&cfg).unwrap();
    let episodes = report::load_episodes(dir).unwrap();
    let mut unsafe_touchdowns = 0;
    for e in &episodes {
        let scene = scenes.iter().find(|s| s.spec.name == e.summary.scenario).unwrap();
        for r in &e.records {
            for (_, p) in swing_touchdowns(&r.state.with_command(r.command), &r.realized_transition) {
                unsafe_touchdowns += !scene.costmap.is_safe(p) as usize;
            }
        }
    }
    let total: usize = m.cells.iter().map(|c| c.episodes).sum();
    let ok: usize = m.cells.iter().map(|c| c.successes).sum();
    let failed: Vec<String> = episodes
        .iter()
        .filter(|e| !e.summary.success)
        .map(|e| format!("{} {:?}", e.summary.stem(), e.summary.outcome))
        .collect();
    verdict(
        total == 27 && ok == 27 && unsafe_touchdowns == 0 && secs < 120.0,
        format!(
            "{ok}/{total} episodes reached the goal, {unsafe_touchdowns} unsafe realized footholds, pipeline {secs:.1} s (< 120 s){}",
            if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join(", ")) }
        ),
    )
}

fn horizon_benefit(m: &MetricsReport) -> Verdict {
    let mut by_scenario: BTreeMap<&str, Vec<(usize, f64)>> = BTreeMap::new();
    for c in &m.cells {
        by_scenario.entry(&c.scenario).or_default().push((c.horizon, c.cumulative_cost));
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, mut costs) in by_scenario {
        costs.sort_by_key(|c| c.0);
        ok &= costs.windows(2).all(|w| w[1].1 <= 1.05 * w[0].1);
        parts.push(format!(
            "{name} {}",
            costs.iter().map(|c| format!("N{}={:.2}", c.0, c.1)).collect::<Vec<_>>().join("/")
        ));
    }
    verdict(ok, format!("cumulative cost per horizon (5% slack): {}", parts.join("; ")))
}

fn online_mae(m: &MetricsReport) -> Verdict {
    let t = m.model_test.unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for r in &m.mae {
        let ratios = [r.mae.fdm / t.fdm.rmse, r.mae.cdm / t.cdm.rmse, r.mae.cvm / t.cvm.rmse];
        ok &= [r.mae.fdm, r.mae.cdm, r.mae.cvm].iter().all(|x| x.is_finite())
            && ratios.iter().all(|&x| x < 3.0);
        parts.push(format!(
            "{} MAE/RMSE {:.2}/{:.2}/{:.2}",
            r.scenario, ratios[0], ratios[1], ratios[2]
        ));
    }
    verdict(ok, format!("FDM/CDM/CVM (< 3): {}", parts.join("; ")))
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism(dir: &Path, first: &BTreeMap<String, Vec<u8>>) -> Verdict {
    run_pipeline(&deterministic_config(dir), None).unwrap();
    let second = snapshot(dir);
    let differing: Vec<&String> = first
        .keys()
        .chain(second.keys())
        .filter(|k| first.get(*k) != second.get(*k))
        .collect();
    report::generate(dir).unwrap();
    let regenerated = snapshot(dir);
    let report_diff = regenerated != second;
    let required = ["dataset.csv", "model.json", "report/scenarios.csv", "report/ablation.csv"];
    let present = required.iter().all(|k| first.contains_key(*k));
    let logs = first.keys().filter(|k| k.ends_with(".jsonl")).count();
    verdict(
        differing.is_empty() && !report_diff && present && logs == 27,
        format!(
            "{} files ({} episode logs) compared byte for byte, {} differ{}; report regenerated from logs identical: {}",
            first.len(),
            logs,
            differing.len(),
            if differing.is_empty() { String::new() } else { format!(" {differing:?}") },
            !report_diff
        ),
    )
}

// ---------------------------------------------------------------- 8

fn latency(dir: &Path) -> Verdict {
    let mut cfg = RunConfig::default();
    cfg.run.horizons = vec![7];
    let models = footstep_harness::experiment::read_model(&dir.join("model.json")).unwrap();
    let mut times = Vec::new();
    for scene in load_scenes(&cfg).unwrap() {
        for (_, result) in run_scene(&scene, &cfg, &models).unwrap() {
            times.extend(result.records.iter().filter_map(|r| r.plan_wall_time_s));
        }
    }
    let t = TimeStats::from_seconds(&times).unwrap();
    verdict(
        t.median_ms < 10.0,
        format!(
            "N=7, 55 commands, {} replans: median {:.3} ms (< 10 ms), mean {:.3}, p99 {:.3}, max {:.3} ms",
            t.n, t.median_ms, t.mean_ms, t.p99_ms, t.max_ms
        ),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Verdict)> = Vec::new();
    let mut record = |n: usize, name: &'static str, v: Verdict| {
        println!("{} {n:>2} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((n, name, v));
    };

    record(1, "coefficient recovery", coefficient_recovery());
    record(2, "ablation trend", ablation_trend());
    record(3, "distance transform oracle", distance_transform_oracle());
    record(4, "planner optimality oracle", planner_optimality());
    record(5, "frame composition identity", frame_identity());

    let dir = tempfile::tempdir().unwrap();
    let t0 = Instant::now();
    run_pipeline(&deterministic_config(dir.path()), None).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let first = snapshot(dir.path());
    let m = report::generate(dir.path()).unwrap();

    record(6, "scenario success", scenario_success(&m, dir.path(), secs));
    record(7, "horizon benefit", horizon_benefit(&m));
    record(8, "replanning latency", latency(dir.path()));
    record(9, "online MAE sanity", online_mae(&m));
    record(10, "determinism", determinism(dir.path(), &first));

    let passed = results.iter().filter(|r| r.2.pass).count();
    println!("{passed}/{} acceptance criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
