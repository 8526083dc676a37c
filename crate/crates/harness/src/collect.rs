//! Training data: every ordered command pair on a grid, each held for a few
//! half-cycles, from a randomized start matched to the first command.

use footstep_core::geometry::{FootArray, RobotState, SwingPair, Vec2, VelocityCommand};
use footstep_core::sim::{propagate, run_episode, step_half_cycle, OracleParams, TransitionLog};
use footstep_core::{Error, Result};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollectSpec {
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
    /// Half-cycles the second command of each pair is held.
    pub holds: Vec<usize>,
    /// Times the whole pair/hold enumeration is repeated.
    pub passes: usize,
    pub seed: u64,
    /// Half-cycles spent under the first command before logging starts.
    pub warmup: usize,
    /// Half-width of the uniform foot offset from the neutral stance, m.
    pub foot_jitter: f64,
    /// Half-width of the uniform start velocity offset, m/s.
    pub velocity_jitter: f64,
}

impl Default for CollectSpec {
    fn default() -> Self {
        Self {
            vx: (0..=10).map(|i| i as f64 * 0.1).collect(),
            vy: (-2..=2).map(|i| i as f64 * 0.1).collect(),
            holds: vec![2, 4, 8],
            passes: 1,
            seed: 1,
            warmup: 0,
            foot_jitter: 0.08,
            velocity_jitter: 0.1,
        }
    }
}

impl CollectSpec {
    pub fn commands(&self) -> Vec<VelocityCommand> {
        let mut out = Vec::with_capacity(self.vx.len() * self.vy.len());
        for &vx in &self.vx {
            for &vy in &self.vy {
                out.push(VelocityCommand::new(vx, vy));
            }
        }
        out
    }

    /// Number of transitions [`collect`] will log.
    pub fn expected_len(&self) -> usize {
        let m = self.vx.len() * self.vy.len();
        self.passes * m * m * self.holds.iter().sum::<usize>()
    }

    pub fn validate(&self) -> Result<()> {
        if self.expected_len() == 0 {
            return Err(Error::InvalidParams(
                "collection schedule is empty (grid, holds and passes must be nonempty)".into(),
            ));
        }
        if !(self.foot_jitter >= 0.0 && self.velocity_jitter >= 0.0) {
            return Err(Error::InvalidParams("jitter must be >= 0".into()));
        }
        for c in self.commands() {
            footstep_core::sim::check_command(c)?;
        }
        Ok(())
    }
}

fn jitter(rng: &mut ChaCha8Rng, half_width: f64) -> Vec2 {
    if half_width == 0.0 {
        return Vec2::ZERO;
    }
    Vec2::new(
        rng.gen_range(-half_width..=half_width),
        rng.gen_range(-half_width..=half_width),
    )
}

fn start_state(
    rng: &mut ChaCha8Rng,
    cmd: VelocityCommand,
    spec: &CollectSpec,
    oracle: &OracleParams,
) -> Result<RobotState> {
    let mut feet = FootArray::default();
    for (f, p) in oracle.p_neutral.iter() {
        feet[f] = p + jitter(rng, spec.foot_jitter);
    }
    let v = cmd.as_vec();
    let mut s = RobotState {
        p_com_w: Vec2::ZERO,
        v_com: v + jitter(rng, spec.velocity_jitter),
        v_com_prev: v + jitter(rng, spec.velocity_jitter),
        v_ref: v,
        v_ref_prev: v,
        p_foot_rel: feet,
        swing_pair_next: if rng.gen_bool(0.5) {
            SwingPair::DiagA
        } else {
            SwingPair::DiagB
        },
    };
    for _ in 0..spec.warmup {
        let tr = step_half_cycle(&s, cmd, oracle, Some(rng))?;
        s = propagate(&s, cmd, &tr);
    }
    s.p_com_w = Vec2::ZERO;
    Ok(s)
}

/// Runs one short episode per (pass, first command, second command, hold).
pub fn collect(spec: &CollectSpec, oracle: &OracleParams) -> Result<TransitionLog> {
    spec.validate()?;
    oracle.validate()?;
    let commands = spec.commands();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut log = TransitionLog::default();
    log.records.reserve(spec.expected_len());
    let mut episode = 0u32;
    for _ in 0..spec.passes {
        for &a in &commands {
            for &b in &commands {
                for &hold in &spec.holds {
                    let start = start_state(&mut rng, a, spec, oracle)?;
                    let seed = rng.next_u64();
                    log.extend(run_episode(episode, &start, &[(b, hold)], None, oracle, Some(seed))?);
                    episode += 1;
                }
            }
        }
    }
    Ok(log)
}
