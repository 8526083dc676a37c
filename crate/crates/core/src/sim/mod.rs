//! Seedable stand-in for a velocity-tracking trot controller.
//!
//! One call to [`step_half_cycle`] advances the gait by one diagonal swing,
//! i.e. from one full-stance instant to the next. Only the quantities a
//! vendor API would expose are produced: CoM displacement and velocity, the
//! shared swing-foot displacement and contact forces.
//!
//! The noise-free dynamics are exactly affine in the model feature vector,
//! which is what lets the regression tests recover them coefficient by
//! coefficient.

mod log_csv;

pub use log_csv::{read_log_csv, write_log_csv, LOG_COLUMNS};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    com_world_update, foot_world_update, relative_foot, FootArray, FootId, Rotation, RobotState,
    SwingPair, Vec2, VelocityCommand,
};
use crate::models::{AffineModel, FeatureVariant, ModelSet, TrainingMeta, FULL_DIM};
use crate::terrain::FootCostmap;

/// Commands accepted by the controller.
pub const VX_RANGE: (f64, f64) = (0.0, 1.0);
pub const VY_RANGE: (f64, f64) = (-0.3, 0.3);
const ENVELOPE_EPS: f64 = 1e-9;

/// Ground-truth controller dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleParams {
    /// Half gait cycle, s.
    pub t_half: f64,
    pub a_ref: f64,
    pub a_ref_prev: f64,
    pub a_com: f64,
    pub a_com_prev: f64,
    /// Velocity feed-forward on the swing foot, s.
    pub k_v: f64,
    /// Posture restoring gain on the swing foot.
    pub k_r: f64,
    /// Posture-to-velocity coupling, 1/s.
    pub k_posture: f64,
    pub p_neutral: FootArray,
    pub sigma_v: f64,
    pub sigma_p: f64,
    pub f_stance: f64,
    pub f_thr: f64,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self {
            t_half: 0.25,
            a_ref: 0.55,
            a_ref_prev: 0.15,
            a_com: 0.25,
            a_com_prev: 0.05,
            k_v: 0.25,
            k_r: 1.5,
            k_posture: 0.3,
            p_neutral: default_stance(),
            sigma_v: 0.01,
            sigma_p: 0.003,
            f_stance: 50.0,
            f_thr: 5.0,
        }
    }
}

pub fn default_stance() -> FootArray {
    FootArray([
        Vec2::new(0.24, 0.15),
        Vec2::new(0.24, -0.15),
        Vec2::new(-0.24, 0.15),
        Vec2::new(-0.24, -0.15),
    ])
}

impl OracleParams {
    pub fn noise_free() -> Self {
        Self {
            sigma_v: 0.0,
            sigma_p: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sum = self.a_ref + self.a_ref_prev + self.a_com + self.a_com_prev;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParams(format!(
                "velocity coefficients sum to {sum}, expected 1"
            )));
        }
        if !(self.t_half > 0.0) {
            return Err(Error::InvalidParams("t_half must be positive".into()));
        }
        if !(self.sigma_v >= 0.0 && self.sigma_p >= 0.0) {
            return Err(Error::InvalidParams("noise sigmas must be >= 0".into()));
        }
        Ok(())
    }

    /// The noise-free dynamics written as Full-variant affine models.
    pub fn exact_models(&self) -> ModelSet {
        let mut cvm = AffineModel::zeros(FeatureVariant::Full);
        let neutral_mean = self.p_neutral.mean();
        for k in 0..2 {
            cvm.weights[k][k] = self.a_com;
            cvm.weights[k][2 + k] = self.a_com_prev;
            cvm.weights[k][4 + k] = self.a_ref;
            cvm.weights[k][6 + k] = self.a_ref_prev;
            for foot in 0..4 {
                cvm.weights[k][8 + 2 * foot + k] = self.k_posture / 4.0;
            }
            cvm.bias[k] = -self.k_posture * component(neutral_mean, k);
        }

        let mut cdm = AffineModel::zeros(FeatureVariant::Full);
        for k in 0..2 {
            for j in 0..FULL_DIM {
                cdm.weights[k][j] = 0.5 * self.t_half * cvm.weights[k][j];
            }
            cdm.weights[k][k] += 0.5 * self.t_half;
            cdm.bias[k] = 0.5 * self.t_half * cvm.bias[k];
        }

        let mut fdm = AffineModel::zeros(FeatureVariant::Full);
        for k in 0..2 {
            for j in 0..FULL_DIM {
                fdm.weights[k][j] = cdm.weights[k][j] + self.k_v * cvm.weights[k][j];
            }
            for foot in 0..4 {
                fdm.weights[k][8 + 2 * foot + k] -= self.k_r / 4.0;
            }
            fdm.bias[k] =
                cdm.bias[k] + self.k_v * cvm.bias[k] + self.k_r * component(neutral_mean, k);
        }

        ModelSet {
            variant: FeatureVariant::Full,
            fdm,
            cdm,
            cvm,
            meta: TrainingMeta::default(),
        }
    }
}

fn component(v: Vec2, k: usize) -> f64 {
    if k == 0 {
        v.x
    } else {
        v.y
    }
}

/// Outcome of one half-cycle, base frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerTransition {
    pub delta_com_b: Vec2,
    /// Shared by both swing feet.
    pub delta_foot_b: Vec2,
    pub v_com_next: Vec2,
    pub swing_pair: SwingPair,
    /// Newtons, at the full-stance instant ending the half-cycle.
    pub contact_forces: [f64; 4],
}

pub fn check_command(cmd: VelocityCommand) -> Result<()> {
    if !(cmd.vx.is_finite() && cmd.vy.is_finite()) {
        return Err(Error::NonFinite("velocity command"));
    }
    let inside = cmd.vx >= VX_RANGE.0 - ENVELOPE_EPS
        && cmd.vx <= VX_RANGE.1 + ENVELOPE_EPS
        && cmd.vy >= VY_RANGE.0 - ENVELOPE_EPS
        && cmd.vy <= VY_RANGE.1 + ENVELOPE_EPS;
    if inside {
        Ok(())
    } else {
        Err(Error::CommandOutOfEnvelope {
            vx: cmd.vx,
            vy: cmd.vy,
        })
    }
}

/// Advances the controller by one trot half-cycle under `cmd`.
///
/// Noise is drawn from `rng` when one is given; `None` runs the exact
/// dynamics.
pub fn step_half_cycle(
    state: &RobotState,
    cmd: VelocityCommand,
    params: &OracleParams,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<ControllerTransition> {
    if !state.is_finite() {
        return Err(Error::NonFinite("robot state"));
    }
    check_command(cmd)?;
    let s = state.with_command(cmd);

    let posture = posture_offset(&s.p_foot_rel, &params.p_neutral);
    let mut v_next = params.a_ref * s.v_ref
        + params.a_ref_prev * s.v_ref_prev
        + params.a_com * s.v_com
        + params.a_com_prev * s.v_com_prev
        + params.k_posture * posture;

    let mut noise = [Vec2::ZERO; 3];
    if let Some(rng) = rng {
        let sigmas = [params.sigma_v, params.sigma_p, params.sigma_p];
        for (n, &sigma) in noise.iter_mut().zip(&sigmas) {
            if sigma > 0.0 {
                let d = Normal::new(0.0, sigma).expect("sigma validated");
                *n = Vec2::new(d.sample(rng), d.sample(rng));
            }
        }
    }
    v_next += noise[0];
    let delta_com_b = 0.5 * params.t_half * (s.v_com + v_next) + noise[1];
    let delta_foot_b = delta_com_b + params.k_v * v_next - params.k_r * posture + noise[2];

    Ok(ControllerTransition {
        delta_com_b,
        delta_foot_b,
        v_com_next: v_next,
        swing_pair: s.swing_pair_next,
        contact_forces: [params.f_stance; 4],
    })
}

/// Mean offset of the feet from the neutral stance.
fn posture_offset(feet: &FootArray, neutral: &FootArray) -> Vec2 {
    let mut acc = Vec2::ZERO;
    for f in FootId::ALL {
        acc += feet[f] - neutral[f];
    }
    acc * 0.25
}

/// Applies `transition` (produced from `state` under `cmd`) to the state.
pub fn propagate(
    state: &RobotState,
    cmd: VelocityCommand,
    transition: &ControllerTransition,
) -> RobotState {
    let s = state.with_command(cmd);
    let rot = Rotation::IDENTITY;
    let feet_w = s.feet_world(rot);
    let p_com_next = com_world_update(s.p_com_w, rot, transition.delta_com_b);
    let mut p_foot_rel = FootArray::default();
    for f in FootId::ALL {
        let foot_w = if transition.swing_pair.contains(f) {
            foot_world_update(feet_w[f], rot, transition.delta_foot_b)
        } else {
            feet_w[f]
        };
        p_foot_rel[f] = relative_foot(foot_w, p_com_next, rot);
    }
    RobotState {
        p_com_w: p_com_next,
        v_com: transition.v_com_next,
        v_com_prev: s.v_com,
        v_ref: s.v_ref,
        v_ref_prev: s.v_ref_prev,
        p_foot_rel,
        swing_pair_next: transition.swing_pair.flipped(),
    }
}

/// True iff every foot pushes strictly harder than `f_thr`.
pub fn detect_full_stance(forces: &[f64; 4], f_thr: f64) -> bool {
    forces.iter().all(|&f| f > f_thr)
}

/// World-frame touchdown points of the swing feet for `transition`.
pub fn swing_touchdowns(
    state: &RobotState,
    transition: &ControllerTransition,
) -> [(FootId, Vec2); 2] {
    let feet_w = state.feet_world(Rotation::IDENTITY);
    transition.swing_pair.feet().map(|f| {
        (
            f,
            foot_world_update(feet_w[f], Rotation::IDENTITY, transition.delta_foot_b),
        )
    })
}

/// One logged half-cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub episode: u32,
    pub step: u32,
    /// State right after the command was sent; `state.v_ref` is the command.
    pub state: RobotState,
    pub transition: ControllerTransition,
    pub p_com_after: Vec2,
    /// False when a swing foot touched down on an unsafe cell.
    pub valid: bool,
}

impl TransitionRecord {
    pub fn command(&self) -> VelocityCommand {
        VelocityCommand::new(self.state.v_ref.x, self.state.v_ref.y)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransitionLog {
    pub records: Vec<TransitionRecord>,
}

impl TransitionLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn extend(&mut self, other: TransitionLog) {
        self.records.extend(other.records);
    }

    pub fn valid_records(&self) -> impl Iterator<Item = &TransitionRecord> {
        self.records.iter().filter(|r| r.valid)
    }
}

/// Runs `schedule` (command, half-cycles held) from `start`.
///
/// With a costmap, the episode stops at the first swing touchdown on an
/// unsafe cell; that record is kept with `valid = false`. `seed = None`
/// disables noise.
pub fn run_episode(
    episode: u32,
    start: &RobotState,
    schedule: &[(VelocityCommand, usize)],
    costmap: Option<&FootCostmap>,
    params: &OracleParams,
    seed: Option<u64>,
) -> Result<TransitionLog> {
    if schedule.is_empty() {
        return Err(Error::InvalidParams("empty command schedule".into()));
    }
    params.validate()?;
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    let mut state = *start;
    let mut log = TransitionLog::default();
    let mut forces = [params.f_stance; 4];
    let mut step = 0u32;
    for &(cmd, hold) in schedule {
        for _ in 0..hold {
            debug_assert!(detect_full_stance(&forces, params.f_thr));
            let tr = step_half_cycle(&state, cmd, params, rng.as_mut())?;
            let decision = state.with_command(cmd);
            let valid = match costmap {
                Some(map) => swing_touchdowns(&decision, &tr)
                    .iter()
                    .all(|&(_, p)| map.is_safe(p)),
                None => true,
            };
            let next = propagate(&state, cmd, &tr);
            log.records.push(TransitionRecord {
                episode,
                step,
                state: decision,
                transition: tr,
                p_com_after: next.p_com_w,
                valid,
            });
            if !valid {
                return Ok(log);
            }
            forces = tr.contact_forces;
            state = next;
            step += 1;
        }
    }
    Ok(log)
}
