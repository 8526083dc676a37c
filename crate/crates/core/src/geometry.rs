//! Planar frames and the robot state shared by the simulator, the learned
//! models and the planner.
//!
//! Everything is restricted to the horizontal plane. Rotations are carried
//! explicitly so the world/base transforms stay honest, but the rest of the
//! crate only ever uses [`Rotation::IDENTITY`].

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// Planar vector. Meters or meters per second depending on context.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, rhs: Vec2) {
        self.x -= rhs.x;
        self.y -= rhs.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, rhs: Vec2) -> Vec2 {
        rhs * self
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Base-to-world rotation about the vertical axis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Rotation {
    yaw: f64,
}

impl Rotation {
    pub const IDENTITY: Rotation = Rotation { yaw: 0.0 };

    /// Builds a rotation, normalizing `yaw` into (-pi, pi].
    pub fn from_yaw(yaw: f64) -> Self {
        use std::f64::consts::{PI, TAU};
        let mut y = yaw % TAU;
        if y <= -PI {
            y += TAU;
        } else if y > PI {
            y -= TAU;
        }
        Self { yaw: y }
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    /// `R · v`
    pub fn apply(&self, v: Vec2) -> Vec2 {
        if self.yaw == 0.0 {
            return v;
        }
        let (s, c) = self.yaw.sin_cos();
        Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
    }

    /// `Rᵀ · v`
    pub fn apply_inverse(&self, v: Vec2) -> Vec2 {
        if self.yaw == 0.0 {
            return v;
        }
        let (s, c) = self.yaw.sin_cos();
        Vec2::new(c * v.x + s * v.y, -s * v.x + c * v.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FootId {
    LF,
    RF,
    LH,
    RH,
}

impl FootId {
    pub const ALL: [FootId; 4] = [FootId::LF, FootId::RF, FootId::LH, FootId::RH];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            FootId::LF => "LF",
            FootId::RF => "RF",
            FootId::LH => "LH",
            FootId::RH => "RH",
        }
    }
}

/// Diagonal pair that swings during a trot half-cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SwingPair {
    /// LF + RH
    DiagA,
    /// RF + LH
    DiagB,
}

impl SwingPair {
    pub fn feet(self) -> [FootId; 2] {
        match self {
            SwingPair::DiagA => [FootId::LF, FootId::RH],
            SwingPair::DiagB => [FootId::RF, FootId::LH],
        }
    }

    pub fn contains(self, foot: FootId) -> bool {
        self.feet().contains(&foot)
    }

    pub fn flipped(self) -> SwingPair {
        match self {
            SwingPair::DiagA => SwingPair::DiagB,
            SwingPair::DiagB => SwingPair::DiagA,
        }
    }

    /// +1 for `DiagA`, -1 for `DiagB`.
    pub fn flag(self) -> f64 {
        match self {
            SwingPair::DiagA => 1.0,
            SwingPair::DiagB => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SwingPair::DiagA => "DiagA",
            SwingPair::DiagB => "DiagB",
        }
    }

    pub fn from_name(s: &str) -> Option<SwingPair> {
        match s {
            "DiagA" => Some(SwingPair::DiagA),
            "DiagB" => Some(SwingPair::DiagB),
            _ => None,
        }
    }
}

/// One vector per foot, indexed by [`FootId`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FootArray(pub [Vec2; 4]);

impl Index<FootId> for FootArray {
    type Output = Vec2;
    fn index(&self, foot: FootId) -> &Vec2 {
        &self.0[foot.index()]
    }
}

impl IndexMut<FootId> for FootArray {
    fn index_mut(&mut self, foot: FootId) -> &mut Vec2 {
        &mut self.0[foot.index()]
    }
}

impl FootArray {
    pub fn iter(&self) -> impl Iterator<Item = (FootId, Vec2)> + '_ {
        FootId::ALL.iter().map(move |&f| (f, self[f]))
    }

    pub fn mean(&self) -> Vec2 {
        self.0.iter().fold(Vec2::ZERO, |acc, &v| acc + v) * 0.25
    }
}

/// High-level velocity reference sent to the walking controller, base frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityCommand {
    pub vx: f64,
    pub vy: f64,
}

impl VelocityCommand {
    pub const STOP: VelocityCommand = VelocityCommand { vx: 0.0, vy: 0.0 };

    pub const fn new(vx: f64, vy: f64) -> Self {
        Self { vx, vy }
    }

    pub fn as_vec(self) -> Vec2 {
        Vec2::new(self.vx, self.vy)
    }
}

/// Robot state at a full-stance instant.
///
/// `v_ref` is the command currently held by the controller and `v_ref_prev`
/// the one before it. Sending a new command goes through
/// [`RobotState::with_command`], which shifts the command history; the
/// resulting *decision state* is what the motion models consume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    /// CoM position, world frame.
    pub p_com_w: Vec2,
    pub v_com: Vec2,
    pub v_com_prev: Vec2,
    pub v_ref: Vec2,
    pub v_ref_prev: Vec2,
    /// Feet relative to the CoM, base frame.
    pub p_foot_rel: FootArray,
    pub swing_pair_next: SwingPair,
}

/// Sanity bound on any velocity carried by the state, m/s.
pub const MAX_SPEED: f64 = 2.0;
/// Sanity bound on a foot's distance from the CoM, m.
pub const MAX_FOOT_REACH: f64 = 0.6;

impl RobotState {
    /// Robot standing still at `p_com_w` with the feet at `stance`.
    pub fn at_rest(p_com_w: Vec2, stance: FootArray) -> Self {
        Self {
            p_com_w,
            v_com: Vec2::ZERO,
            v_com_prev: Vec2::ZERO,
            v_ref: Vec2::ZERO,
            v_ref_prev: Vec2::ZERO,
            p_foot_rel: stance,
            swing_pair_next: SwingPair::DiagA,
        }
    }

    /// The state as seen by the controller right after `cmd` is sent.
    pub fn with_command(&self, cmd: VelocityCommand) -> Self {
        Self {
            v_ref_prev: self.v_ref,
            v_ref: cmd.as_vec(),
            ..*self
        }
    }

    /// World-frame foot positions under rotation `rot`.
    pub fn feet_world(&self, rot: Rotation) -> FootArray {
        let mut out = FootArray::default();
        for (f, rel) in self.p_foot_rel.iter() {
            out[f] = self.p_com_w + rot.apply(rel);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.p_com_w.is_finite()
            && self.v_com.is_finite()
            && self.v_com_prev.is_finite()
            && self.v_ref.is_finite()
            && self.v_ref_prev.is_finite()
            && self.p_foot_rel.0.iter().all(|p| p.is_finite())
    }

    /// Checks the physical sanity bounds (speeds, leg reach).
    pub fn within_bounds(&self) -> bool {
        let speeds = [self.v_com, self.v_com_prev, self.v_ref, self.v_ref_prev];
        self.is_finite()
            && speeds.iter().all(|v| v.norm() <= MAX_SPEED)
            && self.p_foot_rel.0.iter().all(|p| p.norm() <= MAX_FOOT_REACH)
    }
}

/// Swing foot touchdown in the world frame: `p + R·δ`.
pub fn foot_world_update(p_foot_w: Vec2, rot: Rotation, delta_foot_b: Vec2) -> Vec2 {
    p_foot_w + rot.apply(delta_foot_b)
}

/// Next CoM position in the world frame: `p + R·δ`.
pub fn com_world_update(p_com_w: Vec2, rot: Rotation, delta_com_b: Vec2) -> Vec2 {
    p_com_w + rot.apply(delta_com_b)
}

/// Foot position relative to the CoM, base frame: `Rᵀ·(p_foot − p_com)`.
pub fn relative_foot(p_foot_w_next: Vec2, p_com_w_next: Vec2, rot: Rotation) -> Vec2 {
    rot.apply_inverse(p_foot_w_next - p_com_w_next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: Vec2, b: Vec2, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn foot_update_examples() {
        let r0 = Rotation::IDENTITY;
        assert_eq!(
            foot_world_update(Vec2::new(1.0, 0.2), r0, Vec2::ZERO),
            Vec2::new(1.0, 0.2)
        );
        assert_eq!(
            foot_world_update(Vec2::ZERO, r0, Vec2::new(0.15, -0.02)),
            Vec2::new(0.15, -0.02)
        );
        let q = foot_world_update(
            Vec2::new(1.0, 0.0),
            Rotation::from_yaw(FRAC_PI_2),
            Vec2::new(0.1, 0.0),
        );
        assert!(close(q, Vec2::new(1.0, 0.1), 1e-15));
    }

    #[test]
    fn com_update_examples() {
        let r0 = Rotation::IDENTITY;
        assert_eq!(
            com_world_update(Vec2::ZERO, r0, Vec2::new(0.125, 0.0)),
            Vec2::new(0.125, 0.0)
        );
        assert_eq!(
            com_world_update(Vec2::new(2.0, 0.5), r0, Vec2::ZERO),
            Vec2::new(2.0, 0.5)
        );
        let q = com_world_update(Vec2::new(1.0, 1.0), Rotation::from_yaw(PI), Vec2::new(0.1, 0.0));
        assert!(close(q, Vec2::new(0.9, 1.0), 1e-15));
    }

    #[test]
    fn relative_foot_examples() {
        let r0 = Rotation::IDENTITY;
        assert_eq!(
            relative_foot(Vec2::new(0.3, 0.1), Vec2::new(0.3, 0.1), r0),
            Vec2::ZERO
        );
        let d = relative_foot(Vec2::new(0.5, 0.0), Vec2::new(0.3, 0.1), r0);
        assert!(close(d, Vec2::new(0.2, -0.1), 1e-15));
    }

    #[test]
    fn yaw_is_normalized() {
        assert!((Rotation::from_yaw(3.0 * PI).yaw() - PI).abs() < 1e-12);
        assert!((Rotation::from_yaw(-PI).yaw() - PI).abs() < 1e-12);
        assert!((Rotation::from_yaw(-FRAC_PI_2).yaw() + FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn swing_pairs_are_diagonal() {
        assert_eq!(SwingPair::DiagA.feet(), [FootId::LF, FootId::RH]);
        assert_eq!(SwingPair::DiagB.feet(), [FootId::RF, FootId::LH]);
        assert_eq!(SwingPair::DiagA.flipped(), SwingPair::DiagB);
        assert_eq!(SwingPair::DiagB.flipped().flipped(), SwingPair::DiagB);
    }

    #[test]
    fn with_command_shifts_reference_history() {
        let mut s = RobotState::at_rest(Vec2::ZERO, FootArray::default());
        s.v_ref = Vec2::new(0.3, 0.0);
        let d = s.with_command(VelocityCommand::new(0.5, 0.1));
        assert_eq!(d.v_ref, Vec2::new(0.5, 0.1));
        assert_eq!(d.v_ref_prev, Vec2::new(0.3, 0.0));
        assert_eq!(d.p_com_w, s.p_com_w);
    }

    fn vec2() -> impl Strategy<Value = Vec2> {
        (-5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, y)| Vec2::new(x, y))
    }

    proptest! {
        #[test]
        fn composition_identity_without_rotation(pf in vec2(), pc in vec2(), df in vec2(), dc in vec2()) {
            let r = Rotation::IDENTITY;
            let rel = relative_foot(foot_world_update(pf, r, df), com_world_update(pc, r, dc), r);
            let expected = (pf - pc) + df - dc;
            prop_assert!(close(rel, expected, 1e-12));
        }

        #[test]
        fn rotation_round_trip(p in vec2(), d in vec2(), c in vec2(), k in 0usize..4) {
            let yaws = [0.0, FRAC_PI_2, -FRAC_PI_2, PI];
            let r = Rotation::from_yaw(yaws[k]);
            // foot starting at c + R·p relative to a CoM fixed at c
            let foot = foot_world_update(c + r.apply(p), r, d);
            let rel = relative_foot(foot, c, r);
            prop_assert!(close(rel, p + d, 1e-12));
        }
    }
}
