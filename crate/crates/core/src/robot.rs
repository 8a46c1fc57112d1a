//! Geometry of two peg-legged robots joined by a rigid connector.
//!
//! The pair frame has its origin at the composite center of mass, `+x`
//! along the shared heading and `+y` to the left. Robot 1 leads, robot 2
//! trails; the connector spans the gap between robot 1's hind edge and
//! robot 2's front edge.
//!
//! ```text
//!        robot 2                     robot 1
//!   LH2 ------- LF2    <- C ->   LH1 ------- LF1     +y
//!    |           |                |           |       ^
//!   RH2 ------- RF2              RH1 ------- RF1      +--> +x (heading)
//! ```

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Rotation2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotParams {
    pub body_len: f64,
    pub body_width: f64,
    pub leg_stroke: f64,
    pub leg_len_extended: f64,
    pub mass_m: f64,
    pub gravity_g: f64,
    /// Leg-obstacle friction coefficient. Carried for reporting only.
    pub friction_mu: f64,
    /// Gait frequency in Hz. Carried for reporting only.
    pub stride_freq: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            body_len: 0.063,
            body_width: 0.063,
            leg_stroke: 0.025,
            leg_len_extended: 0.050,
            mass_m: 1.0,
            gravity_g: 9.81,
            friction_mu: 0.08,
            stride_freq: 0.33,
        }
    }
}

impl RobotParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("body_len", self.body_len),
            ("body_width", self.body_width),
            ("leg_len_extended", self.leg_len_extended),
            ("mass_m", self.mass_m),
            ("gravity_g", self.gravity_g),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("robot.{name} must be positive, got {v}")));
            }
        }
        if !(self.leg_stroke >= 0.0 && self.leg_stroke < self.leg_len_extended) {
            return Err(Error::InvalidConfig(format!(
                "robot.leg_stroke must lie in [0, leg_len_extended), got {}",
                self.leg_stroke
            )));
        }
        Ok(())
    }

    /// Unit body length, the reporting unit for displacements.
    pub fn ubl(&self) -> f64 {
        self.body_len
    }

    /// Weight `m * g`, the factor converting CoM height into potential energy.
    pub fn weight(&self) -> f64 {
        self.mass_m * self.gravity_g
    }

    /// Copy with every length multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            body_len: self.body_len * k,
            body_width: self.body_width * k,
            leg_stroke: self.leg_stroke * k,
            leg_len_extended: self.leg_len_extended * k,
            ..*self
        }
    }
}

/// Which of the two robots a leg belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RobotIndex {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LegPosition {
    LF,
    RF,
    LH,
    RH,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LegId {
    pub robot: RobotIndex,
    pub position: LegPosition,
}

impl LegId {
    pub const fn new(robot: RobotIndex, position: LegPosition) -> Self {
        Self { robot, position }
    }

    /// The diagonal gait group this leg moves with.
    pub fn group(&self) -> GaitGroup {
        match self.position {
            LegPosition::LF | LegPosition::RH => GaitGroup::Group1,
            LegPosition::RF | LegPosition::LH => GaitGroup::Group2,
        }
    }
}

impl fmt::Display for LegId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = match self.robot {
            RobotIndex::One => 1,
            RobotIndex::Two => 2,
        };
        write!(f, "{:?}{n}", self.position)
    }
}

/// All eight legs in a fixed order.
pub const ALL_LEGS: [LegId; 8] = [
    LegId::new(RobotIndex::One, LegPosition::LF),
    LegId::new(RobotIndex::One, LegPosition::RF),
    LegId::new(RobotIndex::One, LegPosition::LH),
    LegId::new(RobotIndex::One, LegPosition::RH),
    LegId::new(RobotIndex::Two, LegPosition::LF),
    LegId::new(RobotIndex::Two, LegPosition::RF),
    LegId::new(RobotIndex::Two, LegPosition::LH),
    LegId::new(RobotIndex::Two, LegPosition::RH),
];

/// Diagonal leg quadruple that lifts and lands together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GaitGroup {
    /// LF and RH of both robots.
    Group1,
    /// RF and LH of both robots.
    Group2,
}

impl GaitGroup {
    pub fn other(self) -> Self {
        match self {
            GaitGroup::Group1 => GaitGroup::Group2,
            GaitGroup::Group2 => GaitGroup::Group1,
        }
    }

    pub fn contains(self, leg: LegId) -> bool {
        leg.group() == self
    }

    pub fn legs(self) -> impl Iterator<Item = LegId> {
        ALL_LEGS.into_iter().filter(move |l| l.group() == self)
    }

    pub fn label(self) -> &'static str {
        match self {
            GaitGroup::Group1 => "group1",
            GaitGroup::Group2 => "group2",
        }
    }
}

/// Normalize an angle into `(-pi, pi]`.
pub fn normalize_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Horizontal pose of the pair's center of mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl PlanarState {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn heading(&self) -> Vector2<f64> {
        Vector2::new(self.theta.cos(), self.theta.sin())
    }

    pub fn translated(&self, d: Vector2<f64>) -> Self {
        Self::new(self.x + d.x, self.y + d.y, self.theta)
    }

    /// Move by `phi` along the current heading.
    pub fn advanced(&self, phi: f64) -> Self {
        self.translated(phi * self.heading())
    }
}

/// Two robots rigidly joined with a clear gap `connection_c` between their
/// body footprints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairConfig {
    pub params: RobotParams,
    pub connection_c: f64,
}

impl PairConfig {
    pub fn new(params: RobotParams, connection_c: f64) -> Result<Self> {
        params.validate()?;
        if !(connection_c > 0.0 && connection_c.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "connection length must be positive, got {connection_c}"
            )));
        }
        Ok(Self {
            params,
            connection_c,
        })
    }

    pub fn with_connection(&self, connection_c: f64) -> Result<Self> {
        Self::new(self.params, connection_c)
    }

    /// Hip position of `leg` in the pair frame (CoM at the origin).
    pub fn hip_offset(&self, leg: LegId) -> Vector2<f64> {
        let half_c = 0.5 * self.connection_c;
        let len = self.params.body_len;
        let half_w = 0.5 * self.params.body_width;
        let x = match (leg.robot, leg.position) {
            (RobotIndex::One, LegPosition::LF | LegPosition::RF) => half_c + len,
            (RobotIndex::One, LegPosition::LH | LegPosition::RH) => half_c,
            (RobotIndex::Two, LegPosition::LF | LegPosition::RF) => -half_c,
            (RobotIndex::Two, LegPosition::LH | LegPosition::RH) => -half_c - len,
        };
        let y = match leg.position {
            LegPosition::LF | LegPosition::LH => half_w,
            LegPosition::RF | LegPosition::RH => -half_w,
        };
        Vector2::new(x, y)
    }

    /// World-frame horizontal position of a leg tip.
    ///
    /// Pitch rotates the hip about the transverse axis through the CoM, which
    /// pulls its horizontal offset in to `hip_x * cos(alpha)`; the peg hangs
    /// straight down from the hip. Yaw and translation follow.
    pub fn leg_tip_xy(&self, state: &PlanarState, pitch_alpha: f64, leg: LegId) -> Vector2<f64> {
        let hip = self.hip_offset(leg);
        let pitched = Vector2::new(hip.x * pitch_alpha.cos(), hip.y);
        state.position() + Rotation2::new(state.theta) * pitched
    }

    /// Height of a leg's hip above the CoM plane for pitch `alpha`
    /// (positive pitch lifts the leading robot).
    pub fn hip_height_offset(&self, pitch_alpha: f64, leg: LegId) -> f64 {
        self.hip_offset(leg).x * pitch_alpha.sin()
    }

    /// Copy with every length multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            params: self.params.scaled(k),
            connection_c: self.connection_c * k,
        }
    }
}

/// Vertical reach of a leg below its hip for the given stance group.
pub fn leg_extension(group_in_stance: GaitGroup, leg: LegId, params: &RobotParams) -> f64 {
    if group_in_stance.contains(leg) {
        params.leg_len_extended
    } else {
        params.leg_len_extended - params.leg_stroke
    }
}
