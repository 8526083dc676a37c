use footstep_core::geometry::{RobotState, Vec2, VelocityCommand};
use footstep_core::models::ModelSet;
use footstep_core::planner::{expand, plan, PlannerNode, PlannerParams, TerminalReason};
use footstep_core::sim::OracleParams;
use footstep_core::terrain::{compute_foot_costmap, CostmapParams, ElevationMap, FootCostmap};
use proptest::prelude::*;

/// Minimum terminal `g + h` over every command sequence, by plain
/// recursion over `expand`.
fn exhaustive(
    node: &PlannerNode,
    models: &ModelSet,
    cm: &FootCostmap,
    params: &PlannerParams,
    goal: Vec2,
) -> Option<f64> {
    if node.h <= params.goal_radius || node.depth == params.horizon {
        return Some(node.f());
    }
    (0..params.commands.len())
        .filter_map(|ci| expand(node, ci, models, cm, params, goal).ok())
        .filter_map(|child| exhaustive(&child, models, cm, params, goal))
        .min_by(f64::total_cmp)
}

fn flat_costmap() -> FootCostmap {
    let map = ElevationMap::flat(Vec2::ZERO, 0.01, 400, 100);
    compute_foot_costmap(&map, CostmapParams::default()).unwrap()
}

fn start_state(x: f64, y: f64) -> RobotState {
    RobotState::at_rest(Vec2::new(x, y), OracleParams::default().p_neutral)
}

#[test]
fn flat_map_matches_all_27_sequences() {
    let models = OracleParams::noise_free().exact_models();
    let cm = flat_costmap();
    let start = start_state(0.5, 0.5);
    let goal = Vec2::new(2.5, 0.5);
    let params = PlannerParams {
        horizon: 3,
        commands: vec![
            VelocityCommand::new(0.0, 0.0),
            VelocityCommand::new(0.5, 0.0),
            VelocityCommand::new(1.0, 0.0),
        ],
        c_step: 0.3,
        time_budget: None,
        ..PlannerParams::default()
    };
    let p = plan(&start, goal, &models, &cm, &params).unwrap();
    assert_eq!(p.terminal, TerminalReason::HorizonReached);
    let root = PlannerNode::root(&start, goal, &params);
    let best = exhaustive(&root, &models, &cm, &params, goal).unwrap();
    assert_eq!(p.cost, best);
    // full speed all the way is the cheapest on a flat map
    assert!(p.commands.iter().all(|c| c.vx == 1.0));
}

#[test]
fn planned_footholds_keep_clearance() {
    let models = OracleParams::noise_free().exact_models();
    let mut map = ElevationMap::flat(Vec2::ZERO, 0.01, 300, 100);
    for iy in 0..100 {
        for ix in 80..92 {
            let i = map.index(ix, iy);
            map.heights[i] = None;
        }
    }
    let cm = compute_foot_costmap(&map, CostmapParams::default()).unwrap();
    let params = PlannerParams {
        time_budget: None,
        ..PlannerParams::default()
    };
    let p = plan(&start_state(0.5, 0.5), Vec2::new(2.5, 0.5), &models, &cm, &params).unwrap();
    assert!(!p.steps.is_empty());
    for s in &p.steps {
        for (f, d) in s.swing_pair.feet().iter().map(|f| (f, s.distance[f.index()])) {
            assert!(d >= params.min_clearance, "{f:?} at {d}");
        }
    }
}

fn gap_costmap(x0: usize, width: usize, y_lo: usize, y_hi: usize) -> FootCostmap {
    let mut map = ElevationMap::flat(Vec2::ZERO, 0.01, 220, 100);
    for iy in y_lo..y_hi {
        for ix in x0..(x0 + width).min(220) {
            let i = map.index(ix, iy);
            map.heights[i] = None;
        }
    }
    compute_foot_costmap(&map, CostmapParams::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn matches_exhaustive_search_when_step_cost_dominates(
        x0 in 60usize..180,
        width in 2usize..20,
        y_lo in 0usize..60,
        y_span in 10usize..100,
        gx in 0.8f64..1.9,
        horizon in 1usize..=3,
        pick in proptest::collection::btree_set(0usize..55, 2..5),
        dedup: bool,
    ) {
        let models = OracleParams::noise_free().exact_models();
        let cm = gap_costmap(x0, width, y_lo, (y_lo + y_span).min(100));
        let all = footstep_core::planner::default_commands();
        let params = PlannerParams {
            horizon,
            commands: pick.iter().map(|&i| all[i]).collect(),
            c_step: 0.3,
            time_budget: None,
            max_expansions: 1_000_000,
            dedup,
            ..PlannerParams::default()
        };
        let start = start_state(0.5, 0.5);
        let goal = Vec2::new(gx, 0.5);
        let p = plan(&start, goal, &models, &cm, &params).unwrap();
        let best = exhaustive(&PlannerNode::root(&start, goal, &params), &models, &cm, &params, goal);
        match best {
            Some(b) => prop_assert_eq!(p.cost, b),
            None => prop_assert_eq!(p.terminal, TerminalReason::Exhausted),
        }
    }
}
