use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{plan, PlannedStep, PlannerParams, TerminalReason};
use crate::error::{Error, Result};
use crate::geometry::{FootId, RobotState, Rotation, Vec2, VelocityCommand};
use crate::models::ModelSet;
use crate::sim::{
    detect_full_stance, propagate, step_half_cycle, swing_touchdowns, ControllerTransition,
    OracleParams,
};
use crate::terrain::{foot_cost, FootCostmap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub max_steps: usize,
    /// Seeds the simulator noise; `None` runs it noise-free.
    pub seed: Option<u64>,
    /// Record per-replan wall time. When off, the planner's wall-clock
    /// budget is ignored too, so runs are byte-reproducible.
    pub record_timing: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            max_steps: 100,
            seed: None,
            record_timing: true,
        }
    }
}

/// Per-component absolute error of the first-step prediction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelAbsErrors {
    pub fdm: [f64; 2],
    pub cdm: [f64; 2],
    pub cvm: [f64; 2],
}

/// One replan cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// State at the full stance where the plan was made.
    pub state: RobotState,
    pub plan_commands: Vec<VelocityCommand>,
    pub predicted_footholds: Vec<PlannedStep>,
    pub plan_terminal: TerminalReason,
    pub expanded: usize,
    /// The command actually sent.
    pub command: VelocityCommand,
    pub realized_transition: ControllerTransition,
    pub model_abs_errors: ModelAbsErrors,
    pub plan_wall_time_s: Option<f64>,
    /// Step cost evaluated on the realized state.
    pub first_step_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EpisodeOutcome {
    GoalReached,
    UnsafeFoothold { step: usize, foot: FootId, p: Vec2 },
    StepBudget,
    /// A half-cycle ended without all four feet loaded.
    LostStance { step: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub success: bool,
    pub outcome: EpisodeOutcome,
    pub steps: usize,
    pub final_state: RobotState,
    pub cumulative_cost: f64,
    /// Mean absolute first-step error over the episode, per model.
    pub online_mae: [f64; 3],
    pub records: Vec<StepRecord>,
}

/// Plans, sends the first command, steps the simulator, and repeats until
/// the goal is reached, a realized foothold is unsafe, or `max_steps` runs
/// out.
pub fn receding_horizon_run(
    oracle: &OracleParams,
    models: &ModelSet,
    costmap: &FootCostmap,
    start: &RobotState,
    goal: Vec2,
    params: &PlannerParams,
    cfg: &EpisodeConfig,
) -> Result<EpisodeResult> {
    oracle.validate()?;
    params.validate()?;
    if !start.is_finite() {
        return Err(Error::NonFinite("start state"));
    }
    let mut rng = cfg.seed.map(ChaCha8Rng::seed_from_u64);
    let mut planner = params.clone();
    if !cfg.record_timing {
        planner.time_budget = None;
    }
    let mut state = *start;
    let mut records = Vec::new();
    let mut cumulative = 0.0;

    let outcome = 'run: {
        for step in 0..cfg.max_steps {
            if (state.p_com_w - goal).norm() <= params.goal_radius {
                break 'run EpisodeOutcome::GoalReached;
            }
            let p = plan(&state, goal, models, costmap, &planner)?;
            let cmd = p.commands.first().copied().unwrap_or(VelocityCommand::STOP);
            let tr = step_half_cycle(&state, cmd, oracle, rng.as_mut())?;
            let pred = models.predict_state(&state.with_command(cmd));
            let abs = |a: Vec2, b: Vec2| [(a.x - b.x).abs(), (a.y - b.y).abs()];
            let errors = ModelAbsErrors {
                fdm: abs(pred.delta_foot_b, tr.delta_foot_b),
                cdm: abs(pred.delta_com_b, tr.delta_com_b),
                cvm: abs(pred.v_com_next, tr.v_com_next),
            };
            let touchdowns = swing_touchdowns(&state.with_command(cmd), &tr);
            let next = propagate(&state, cmd, &tr);
            let feet = next.feet_world(Rotation::IDENTITY);
            let penalty: f64 = FootId::ALL
                .iter()
                .map(|&f| foot_cost(costmap, feet[f], params.d_max).value)
                .sum();
            let cost = params.c_step + params.w_foot * penalty + (next.p_com_w - goal).norm();
            cumulative += cost;
            records.push(StepRecord {
                step,
                state,
                plan_commands: p.commands,
                predicted_footholds: p.steps,
                plan_terminal: p.terminal,
                expanded: p.stats.expanded,
                command: cmd,
                realized_transition: tr,
                model_abs_errors: errors,
                plan_wall_time_s: cfg.record_timing.then_some(p.stats.wall_time_s),
                first_step_cost: cost,
            });
            state = next;
            if let Some(&(foot, p)) = touchdowns.iter().find(|(_, p)| !costmap.is_safe(*p)) {
                break 'run EpisodeOutcome::UnsafeFoothold { step, foot, p };
            }
            if !detect_full_stance(&tr.contact_forces, oracle.f_thr) {
                break 'run EpisodeOutcome::LostStance { step };
            }
        }
        if (state.p_com_w - goal).norm() <= params.goal_radius {
            EpisodeOutcome::GoalReached
        } else {
            EpisodeOutcome::StepBudget
        }
    };

    let n = records.len().max(1) as f64;
    let mut mae = [0.0; 3];
    for r in &records {
        let e = &r.model_abs_errors;
        for (m, pair) in mae.iter_mut().zip([e.fdm, e.cdm, e.cvm]) {
            *m += (pair[0] + pair[1]) / (2.0 * n);
        }
    }
    Ok(EpisodeResult {
        success: outcome == EpisodeOutcome::GoalReached,
        outcome,
        steps: records.len(),
        final_state: state,
        cumulative_cost: cumulative,
        online_mae: mae,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::default_stance;
    use crate::terrain::{compute_foot_costmap, CostmapParams, ElevationMap};

    fn setup() -> (OracleParams, ModelSet, FootCostmap, RobotState) {
        let oracle = OracleParams::default();
        let models = oracle.exact_models();
        let map = ElevationMap::flat(Vec2::ZERO, 0.01, 400, 100);
        let cm = compute_foot_costmap(&map, CostmapParams::default()).unwrap();
        let start = RobotState::at_rest(Vec2::new(0.5, 0.5), default_stance());
        (oracle, models, cm, start)
    }

    fn quick() -> PlannerParams {
        PlannerParams {
            horizon: 3,
            time_budget: None,
            max_expansions: 2000,
            ..PlannerParams::default()
        }
    }

    #[test]
    fn noise_free_closed_loop_matches_predictions() {
        let (_, models, cm, start) = setup();
        let oracle = OracleParams::noise_free();
        let cfg = EpisodeConfig {
            record_timing: false,
            ..EpisodeConfig::default()
        };
        let r = receding_horizon_run(&oracle, &models, &cm, &start, Vec2::new(1.5, 0.5), &quick(), &cfg)
            .unwrap();
        assert!(r.success, "{:?}", r.outcome);
        for (rec, next) in r.records.iter().zip(r.records.iter().skip(1)) {
            let pred = rec.predicted_footholds[0];
            assert!((pred.com - next.state.p_com_w).norm() < 1e-6);
            for m in [rec.model_abs_errors.fdm, rec.model_abs_errors.cdm, rec.model_abs_errors.cvm] {
                assert!(m[0] < 1e-9 && m[1] < 1e-9);
            }
        }
        assert!(r.online_mae.iter().all(|&m| m < 1e-9));
    }

    #[test]
    fn seeded_runs_repeat() {
        let (oracle, models, cm, start) = setup();
        let cfg = EpisodeConfig {
            seed: Some(11),
            record_timing: false,
            ..EpisodeConfig::default()
        };
        let goal = Vec2::new(2.0, 0.5);
        let a = receding_horizon_run(&oracle, &models, &cm, &start, goal, &quick(), &cfg).unwrap();
        let b = receding_horizon_run(&oracle, &models, &cm, &start, goal, &quick(), &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.success);
        assert!(a.records.iter().all(|r| r.plan_wall_time_s.is_none()));
    }

    #[test]
    fn step_budget_failure_is_data() {
        let (oracle, models, cm, start) = setup();
        let cfg = EpisodeConfig {
            max_steps: 2,
            ..EpisodeConfig::default()
        };
        let r = receding_horizon_run(&oracle, &models, &cm, &start, Vec2::new(3.5, 0.5), &quick(), &cfg)
            .unwrap();
        assert!(!r.success);
        assert_eq!(r.outcome, EpisodeOutcome::StepBudget);
        assert_eq!(r.steps, 2);
    }
}
