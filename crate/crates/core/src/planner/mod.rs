//! Best-first footstep search over a discrete velocity command set.
//!
//! Nodes are full-stance states predicted by the learned models. The path
//! cost `g` accumulates a per-step cost plus the foot safety penalties; the
//! heuristic `h` is the CoM's Euclidean distance to the goal. When `c_step`
//! is at least the longest CoM step the models can produce, `h` is
//! consistent and the first terminal node popped is optimal.

mod episode;

pub use episode::{
    receding_horizon_run, EpisodeConfig, EpisodeOutcome, EpisodeResult, ModelAbsErrors,
    StepRecord,
};

use std::cmp::Ordering;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FootArray, FootId, Rotation, RobotState, SwingPair, Vec2, VelocityCommand};
use crate::models::ModelSet;
use crate::sim::{check_command, propagate, ControllerTransition};
use crate::terrain::{foot_cost, FootCostmap};

/// The default grid: vx 0.0..=1.0 and vy -0.2..=0.2, both in 0.1 steps,
/// vx-major.
pub fn default_commands() -> Vec<VelocityCommand> {
    let mut out = Vec::with_capacity(55);
    for i in 0..=10 {
        for j in -2..=2 {
            out.push(VelocityCommand::new(i as f64 * 0.1, j as f64 * 0.1));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerParams {
    /// Search depth N, in half-cycles.
    pub horizon: usize,
    pub commands: Vec<VelocityCommand>,
    /// CoM quantization for duplicate detection, m.
    pub com_grid: f64,
    pub goal_radius: f64,
    /// Feet closer than this to an unsafe cell are penalized, m.
    pub d_max: f64,
    /// Swing footholds closer than this to an unsafe cell are rejected, m.
    pub min_clearance: f64,
    pub w_foot: f64,
    /// Cost of every step, m.
    pub c_step: f64,
    /// Wall-clock limit per query, s. `None` leaves only the node budget.
    pub time_budget: Option<f64>,
    pub max_expansions: usize,
    pub dedup: bool,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            horizon: 5,
            commands: default_commands(),
            com_grid: 0.01,
            goal_radius: 0.10,
            d_max: 0.05,
            min_clearance: 0.02,
            w_foot: 1.0,
            c_step: 0.01,
            time_budget: Some(0.005),
            max_expansions: 20_000,
            dedup: true,
        }
    }
}

impl PlannerParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.horizon == 0 {
            return bad("horizon must be >= 1".into());
        }
        if self.commands.is_empty() {
            return bad("command set is empty".into());
        }
        if self.commands.len() >= u16::MAX as usize {
            return bad("command set too large".into());
        }
        for &c in &self.commands {
            check_command(c)?;
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let non_negative = |v: f64| v.is_finite() && v >= 0.0;
        if !positive(self.com_grid) {
            return bad(format!("com_grid must be positive, got {}", self.com_grid));
        }
        if !(non_negative(self.goal_radius)
            && non_negative(self.d_max)
            && non_negative(self.min_clearance)
            && non_negative(self.w_foot)
            && non_negative(self.c_step))
        {
            return bad("goal_radius, d_max, min_clearance, w_foot and c_step must be >= 0".into());
        }
        if let Some(t) = self.time_budget {
            if !positive(t) {
                return bad(format!("time_budget must be positive, got {t}"));
            }
        }
        if self.max_expansions == 0 {
            return bad("max_expansions must be >= 1".into());
        }
        Ok(())
    }
}

/// Command index used for the root, which was reached by no command.
const ROOT_CMD: u16 = u16::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeKey {
    pub cell: (i64, i64),
    pub cmd: u16,
    pub swing: SwingPair,
}

pub fn node_key(state: &RobotState, cmd: u16, com_grid: f64) -> NodeKey {
    let q = |v: f64| (v / com_grid).floor() as i64;
    NodeKey {
        cell: (q(state.p_com_w.x), q(state.p_com_w.y)),
        cmd,
        swing: state.swing_pair_next,
    }
}

/// World-frame footholds after one predicted step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannedStep {
    pub cmd: VelocityCommand,
    pub com: Vec2,
    pub swing_pair: SwingPair,
    pub feet: FootArray,
    /// Distance from each foot to the nearest unsafe cell, m.
    pub distance: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerNode {
    pub state: RobotState,
    /// Index into the command set; the root has none.
    pub cmd_index: Option<usize>,
    pub depth: usize,
    pub g: f64,
    pub h: f64,
    pub parent: Option<usize>,
    pub key: NodeKey,
    pub step: Option<PlannedStep>,
}

impl PlannerNode {
    pub fn root(start: &RobotState, goal: Vec2, params: &PlannerParams) -> Self {
        Self {
            state: *start,
            cmd_index: None,
            depth: 0,
            g: 0.0,
            h: (start.p_com_w - goal).norm(),
            parent: None,
            key: node_key(start, ROOT_CMD, params.com_grid),
            step: None,
        }
    }

    pub fn f(&self) -> f64 {
        self.g + self.h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    UnsafeFoothold,
    OutOfMap,
    /// The models produced a non-finite or physically implausible state.
    Diverged,
}

/// Predicts the child reached from `node` by command `cmd_index`.
///
/// The child's `parent` is left unset.
pub fn expand(
    node: &PlannerNode,
    cmd_index: usize,
    models: &ModelSet,
    costmap: &FootCostmap,
    params: &PlannerParams,
    goal: Vec2,
) -> std::result::Result<PlannerNode, RejectReason> {
    let cmd = params.commands[cmd_index];
    let decision = node.state.with_command(cmd);
    let pred = models.predict_state(&decision);
    let swing = decision.swing_pair_next;
    let rot = Rotation::IDENTITY;
    let feet_before = decision.feet_world(rot);
    for f in swing.feet() {
        let p = feet_before[f] + rot.apply(pred.delta_foot_b);
        let Some((ix, iy)) = costmap.cell_of(p) else {
            return Err(RejectReason::OutOfMap);
        };
        if costmap.is_unsafe_cell(ix, iy) || costmap.dist_at_cell(ix, iy) < params.min_clearance {
            return Err(RejectReason::UnsafeFoothold);
        }
    }
    let transition = ControllerTransition {
        delta_com_b: pred.delta_com_b,
        delta_foot_b: pred.delta_foot_b,
        v_com_next: pred.v_com_next,
        swing_pair: swing,
        contact_forces: [0.0; 4],
    };
    let state = propagate(&node.state, cmd, &transition);
    if !state.within_bounds() {
        return Err(RejectReason::Diverged);
    }
    let feet = state.feet_world(rot);
    let mut distance = [0.0; 4];
    let mut penalty = 0.0;
    for f in FootId::ALL {
        let c = foot_cost(costmap, feet[f], params.d_max);
        distance[f.index()] = c.distance;
        penalty += c.value;
    }
    Ok(PlannerNode {
        state,
        cmd_index: Some(cmd_index),
        depth: node.depth + 1,
        g: node.g + params.c_step + params.w_foot * penalty,
        h: (state.p_com_w - goal).norm(),
        parent: None,
        key: node_key(&state, cmd_index as u16, params.com_grid),
        step: Some(PlannedStep {
            cmd,
            com: state.p_com_w,
            swing_pair: swing,
            feet,
            distance,
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminalReason {
    GoalReached,
    HorizonReached,
    /// Time or node budget ran out.
    Timeout,
    Exhausted,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub expanded: usize,
    pub generated: usize,
    /// Children dropped as duplicates of an open or visited key.
    pub discarded: usize,
    pub rejected: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub commands: Vec<VelocityCommand>,
    pub steps: Vec<PlannedStep>,
    pub terminal: TerminalReason,
    /// `g + h` of the node the plan leads to.
    pub cost: f64,
    pub stats: SearchStats,
}

impl Plan {
    pub fn com_waypoints(&self) -> impl Iterator<Item = Vec2> + '_ {
        self.steps.iter().map(|s| s.com)
    }
}

#[derive(Debug, Clone, Copy)]
struct OpenEntry {
    f: f64,
    seq: usize,
    node: usize,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OpenEntry {}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OpenEntry {
    // reversed so the max-heap pops the lowest f, then the oldest entry
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Searches for the cheapest command sequence from `start` toward `goal`.
///
/// Stops at the first popped node that is within `goal_radius` of the goal
/// or at depth `horizon`. If the budget runs out or the open list empties
/// first, the plan leads to the lowest-f node among the deepest generated.
pub fn plan(
    start: &RobotState,
    goal: Vec2,
    models: &ModelSet,
    costmap: &FootCostmap,
    params: &PlannerParams,
) -> Result<Plan> {
    params.validate()?;
    if !start.is_finite() {
        return Err(Error::NonFinite("start state"));
    }
    if !goal.is_finite() {
        return Err(Error::NonFinite("goal"));
    }
    let t0 = Instant::now();
    let mut nodes = vec![PlannerNode::root(start, goal, params)];
    let mut open = BinaryHeap::new();
    let mut open_keys: HashMap<NodeKey, usize> = HashMap::new();
    let mut visited: HashSet<NodeKey> = HashSet::new();
    let mut stats = SearchStats::default();
    let mut seq = 0;
    open.push(OpenEntry {
        f: nodes[0].f(),
        seq,
        node: 0,
    });
    open_keys.insert(nodes[0].key, 0);
    let mut fallback = 0;

    let terminal = loop {
        let Some(entry) = open.pop() else {
            break (0, TerminalReason::Exhausted);
        };
        let idx = entry.node;
        let key = nodes[idx].key;
        if params.dedup {
            // stale entry replaced by a cheaper node with the same key
            if open_keys.get(&key) != Some(&idx) {
                continue;
            }
            open_keys.remove(&key);
            visited.insert(key);
        }
        if nodes[idx].h <= params.goal_radius {
            break (idx, TerminalReason::GoalReached);
        }
        if nodes[idx].depth >= params.horizon {
            break (idx, TerminalReason::HorizonReached);
        }
        if stats.expanded >= params.max_expansions {
            break (0, TerminalReason::Timeout);
        }
        if let Some(budget) = params.time_budget {
            if t0.elapsed().as_secs_f64() >= budget {
                break (0, TerminalReason::Timeout);
            }
        }
        stats.expanded += 1;
        for ci in 0..params.commands.len() {
            let mut child = match expand(&nodes[idx], ci, models, costmap, params, goal) {
                Ok(c) => c,
                Err(_) => {
                    stats.rejected += 1;
                    continue;
                }
            };
            child.parent = Some(idx);
            let f = child.f();
            let child_idx = nodes.len();
            if params.dedup {
                if visited.contains(&child.key) {
                    stats.discarded += 1;
                    continue;
                }
                match open_keys.entry(child.key) {
                    Entry::Occupied(mut e) => {
                        if f < nodes[*e.get()].f() {
                            e.insert(child_idx);
                        } else {
                            stats.discarded += 1;
                            continue;
                        }
                    }
                    Entry::Vacant(e) => {
                        e.insert(child_idx);
                    }
                }
            }
            stats.generated += 1;
            if deeper_or_cheaper(&child, &nodes[fallback]) {
                fallback = child_idx;
            }
            nodes.push(child);
            seq += 1;
            open.push(OpenEntry {
                f,
                seq,
                node: child_idx,
            });
        }
    };

    let (mut end, reason) = terminal;
    if matches!(reason, TerminalReason::Timeout | TerminalReason::Exhausted) {
        end = fallback;
    }
    let mut steps = Vec::with_capacity(nodes[end].depth);
    let mut cur = Some(end);
    while let Some(i) = cur {
        if let Some(s) = nodes[i].step {
            steps.push(s);
        }
        cur = nodes[i].parent;
    }
    steps.reverse();
    stats.wall_time_s = t0.elapsed().as_secs_f64();
    Ok(Plan {
        commands: steps.iter().map(|s| s.cmd).collect(),
        steps,
        terminal: reason,
        cost: nodes[end].f(),
        stats,
    })
}

fn deeper_or_cheaper(a: &PlannerNode, b: &PlannerNode) -> bool {
    a.depth > b.depth || (a.depth == b.depth && a.f() < b.f())
}
