//! Quasi-static gait simulation on the energy landscape.
//!
//! After each leg-group touchdown the pair slides downhill on the pitch
//! resolved energy surface (the flowing phase) until it comes to rest at a
//! local minimum (the jamming phase). Two half-strides make up one stride;
//! the directions in which the pair first moves after each touchdown decide
//! whether successive half-strides add up or cancel.

use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{height_at_state, height_gradient, resolve_pose, ResolvedPose};
use crate::error::{Error, Result};
use crate::robot::{normalize_angle, GaitGroup, LegId, PairConfig, PlanarState, RobotParams};
use crate::terrain::{BoulderField, TerrainSegmentList};

/// Numerical settings for relaxation, jamming search and classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    /// First trial step of the line search (m).
    pub initial_step: f64,
    /// Lever arm converting yaw into an equivalent length (m).
    pub theta_arm: f64,
    /// Step shrink factor during backtracking.
    pub backtrack: f64,
    /// Gradient norm below which a state counts as jammed (J/m).
    pub grad_tol: f64,
    /// Step length below which the descent stops (m).
    pub step_min: f64,
    pub iter_max: usize,
    /// Seeds per lattice axis for the jamming search.
    pub seed_grid: usize,
    /// Yaw samples across `[-theta_window, theta_window]`.
    pub yaw_samples: usize,
    pub theta_window: f64,
    pub dedup_tol_xy: f64,
    pub dedup_tol_theta: f64,
    /// `v1 . v2` must exceed this for traversal.
    pub dot_threshold: f64,
    /// Minimum stride displacement for traversal, as a fraction of the
    /// lattice spacing along x.
    pub disp_fraction: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            initial_step: 1e-3,
            theta_arm: 0.1,
            backtrack: 0.5,
            grad_tol: 1e-4,
            step_min: 1e-7,
            iter_max: 10_000,
            seed_grid: 21,
            yaw_samples: 9,
            theta_window: 0.26,
            dedup_tol_xy: 1e-4,
            dedup_tol_theta: 1e-3,
            dot_threshold: 0.0,
            disp_fraction: 0.2,
        }
    }
}

impl SimSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("initial_step", self.initial_step),
            ("theta_arm", self.theta_arm),
            ("grad_tol", self.grad_tol),
            ("step_min", self.step_min),
            ("dedup_tol_xy", self.dedup_tol_xy),
            ("dedup_tol_theta", self.dedup_tol_theta),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("settings.{name} must be positive, got {v}")));
            }
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "settings.backtrack must lie in (0, 1), got {}",
                self.backtrack
            )));
        }
        if self.iter_max == 0 || self.seed_grid == 0 || self.yaw_samples == 0 {
            return Err(Error::InvalidConfig(
                "settings.iter_max, seed_grid and yaw_samples must be at least 1".into(),
            ));
        }
        if !(self.theta_window >= 0.0) {
            return Err(Error::InvalidConfig("settings.theta_window must be non-negative".into()));
        }
        Ok(())
    }

    /// Settings for a copy of the problem with every length scaled by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            initial_step: self.initial_step * k,
            theta_arm: self.theta_arm * k,
            step_min: self.step_min * k,
            dedup_tol_xy: self.dedup_tol_xy * k,
            ..*self
        }
    }

    /// Stride displacement required to count as traversal on `field`.
    pub fn disp_threshold(&self, field: &BoulderField) -> f64 {
        self.disp_fraction * field.spacing_x()
    }
}

/// Outcome of one relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct Relaxation {
    pub jammed: ResolvedPose,
    /// Unit horizontal direction of the first accepted descent step; `None`
    /// when the start was already at rest.
    pub initial_dir: Option<Vector2<f64>>,
    /// Accepted states, starting with the start state.
    pub path: Vec<PlanarState>,
    /// Energy at each entry of `path`.
    pub energies: Vec<f64>,
}

fn step_state(s: &PlanarState, d: Vector3<f64>, step: f64, arm: f64) -> PlanarState {
    PlanarState::new(s.x + step * d.x, s.y + step * d.y, s.theta + step * d.z / arm)
}

/// Slide from `start` down the energy landscape of `stance` until jammed.
///
/// Steepest descent over `(X, Y, arm * theta)` with a backtracking line
/// search. Every accepted step strictly lowers the energy. Stops when the
/// gradient norm drops to `grad_tol` or no step longer than `step_min`
/// lowers the energy.
pub fn relax(
    config: &PairConfig,
    field: &BoulderField,
    start: &PlanarState,
    stance: GaitGroup,
    settings: &SimSettings,
) -> Result<Relaxation> {
    // Descend on the CoM height rather than on E = W z: the two share every
    // minimizer and comparison, and working in height keeps the path
    // bit-identical for any mass and gravity.
    let weight = config.params.weight();
    let height_tol = settings.grad_tol / weight;
    let arm = settings.theta_arm;
    let mut state = *start;
    let mut z = height_at_state(config, field, &state, stance)?;
    let mut path = vec![state];
    let mut energies = vec![weight * z];
    let mut initial_dir = None;
    let mut step = settings.initial_step;
    let mut first = true;

    for _ in 0..settings.iter_max {
        let g = height_gradient(config, field, &state, stance)?;
        let scaled = Vector3::new(g.x, g.y, g.z / arm);
        let norm = scaled.norm();
        if norm <= height_tol {
            return finish(config, field, state, stance, initial_dir, path, energies);
        }
        let dir = -scaled / norm;
        let accepted = loop {
            if step < settings.step_min {
                break None;
            }
            let cand = step_state(&state, dir, step, arm);
            let zc = height_at_state(config, field, &cand, stance)?;
            if zc < z {
                break Some((cand, zc));
            }
            step *= settings.backtrack;
        };
        let Some((next, zn)) = accepted else {
            return finish(config, field, state, stance, initial_dir, path, energies);
        };
        if first {
            let dxy = Vector2::new(next.x - state.x, next.y - state.y);
            let n = dxy.norm();
            if n > 0.0 {
                initial_dir = Some(dxy / n);
            }
            first = false;
        }
        state = next;
        z = zn;
        path.push(state);
        energies.push(weight * z);
        step = (step / settings.backtrack).min(settings.initial_step);
    }
    Err(Error::MaxIterations {
        iterations: settings.iter_max,
    })
}

fn finish(
    config: &PairConfig,
    field: &BoulderField,
    state: PlanarState,
    stance: GaitGroup,
    initial_dir: Option<Vector2<f64>>,
    path: Vec<PlanarState>,
    energies: Vec<f64>,
) -> Result<Relaxation> {
    Ok(Relaxation {
        jammed: resolve_pose(config, field, &state, stance)?,
        initial_dir,
        path,
        energies,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Classification {
    Traversing,
    Stuck,
    NoMotion,
}

impl Classification {
    pub fn label(self) -> &'static str {
        match self {
            Classification::Traversing => "Traversing",
            Classification::Stuck => "Stuck",
            Classification::NoMotion => "NoMotion",
        }
    }
}

/// Summary of one full stride starting from a jammed state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrideOutcome {
    /// First motion direction after the second group lands.
    pub v1_dir: Option<Vector2<f64>>,
    /// First motion direction after the first group lands again.
    pub v2_dir: Option<Vector2<f64>>,
    pub dot_v1v2: f64,
    /// CoM change over the stride (m).
    pub displacement: Vector2<f64>,
    pub displacement_ubl: f64,
    pub classification: Classification,
}

impl StrideOutcome {
    pub fn new(
        v1_dir: Option<Vector2<f64>>,
        v2_dir: Option<Vector2<f64>>,
        displacement: Vector2<f64>,
        params: &RobotParams,
        field: &BoulderField,
        settings: &SimSettings,
    ) -> Self {
        let dot_v1v2 = match (v1_dir, v2_dir) {
            (Some(a), Some(b)) => a.dot(&b).clamp(-1.0, 1.0),
            _ => 0.0,
        };
        let classification = if v1_dir.is_none() && v2_dir.is_none() {
            Classification::NoMotion
        } else if dot_v1v2 > settings.dot_threshold
            && displacement.norm() >= settings.disp_threshold(field)
        {
            Classification::Traversing
        } else {
            Classification::Stuck
        };
        Self {
            v1_dir,
            v2_dir,
            dot_v1v2,
            displacement,
            displacement_ubl: displacement.norm() / params.ubl(),
            classification,
        }
    }
}

/// Both half-strides of one gait cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct StrideResult {
    pub outcome: StrideOutcome,
    pub first_half: Relaxation,
    pub second_half: Relaxation,
}

impl StrideResult {
    pub fn jammed_out(&self) -> PlanarState {
        self.second_half.jammed.state
    }
}

/// Run one stride from a state jammed under `stance_in` and return where
/// the pair comes to rest with `stance_in` back on the ground.
pub fn stride_map(
    config: &PairConfig,
    field: &BoulderField,
    jammed_in: &PlanarState,
    stance_in: GaitGroup,
    settings: &SimSettings,
) -> Result<(StrideOutcome, PlanarState)> {
    let r = stride(config, field, jammed_in, stance_in, settings)?;
    Ok((r.outcome, r.jammed_out()))
}

/// [`stride_map`] keeping both relaxations.
pub fn stride(
    config: &PairConfig,
    field: &BoulderField,
    jammed_in: &PlanarState,
    stance_in: GaitGroup,
    settings: &SimSettings,
) -> Result<StrideResult> {
    let first_half = relax(config, field, jammed_in, stance_in.other(), settings)?;
    let second_half = relax(config, field, &first_half.jammed.state, stance_in, settings)?;
    let displacement = second_half.jammed.state.position() - jammed_in.position();
    let outcome = StrideOutcome::new(
        first_half.initial_dir,
        second_half.initial_dir,
        displacement,
        &config.params,
        field,
        settings,
    );
    Ok(StrideResult {
        outcome,
        first_half,
        second_half,
    })
}

/// A stride-periodic rest state.
#[derive(Debug, Clone, PartialEq)]
pub struct JammingState {
    pub pose: ResolvedPose,
    pub stance: GaitGroup,
    /// CoM position along the heading, reduced into one lattice period.
    pub phi_offset: f64,
    /// Distance of each stance-leg tip from the nearest footprint edge.
    pub edge_distances: Vec<(LegId, f64)>,
    /// The stride taken from this state.
    pub outcome: StrideOutcome,
}

impl JammingState {
    fn new(
        config: &PairConfig,
        field: &BoulderField,
        pose: ResolvedPose,
        outcome: StrideOutcome,
    ) -> Self {
        let stance = pose.stance;
        let edge_distances = stance
            .legs()
            .map(|leg| {
                let tip = config.leg_tip_xy(&pose.state, pose.alpha, leg);
                (leg, field.edge_distance_at(tip))
            })
            .collect();
        let along = pose.state.position().dot(&pose.state.heading());
        let phi_offset = along.rem_euclid(field.spacing_x());
        Self {
            pose,
            stance,
            phi_offset,
            edge_distances,
            outcome,
        }
    }

    pub fn state(&self) -> PlanarState {
        self.pose.state
    }
}

/// Whether two states coincide up to a lattice translation.
pub fn same_modulo_lattice(
    field: &BoulderField,
    a: &PlanarState,
    b: &PlanarState,
    tol_xy: f64,
    tol_theta: f64,
) -> bool {
    let r = field.lattice_residual(b.position() - a.position());
    r.x.abs() <= tol_xy
        && r.y.abs() <= tol_xy
        && normalize_angle(b.theta - a.theta).abs() <= tol_theta
}

fn seed_states(field: &BoulderField, theta_window: f64, settings: &SimSettings) -> Vec<PlanarState> {
    let n = settings.seed_grid;
    let m = settings.yaw_samples;
    let o = field.origin();
    let mut seeds = Vec::with_capacity(n * n * m);
    for i in 0..n {
        for j in 0..n {
            for k in 0..m {
                let theta = if m == 1 {
                    0.0
                } else {
                    -theta_window + 2.0 * theta_window * k as f64 / (m - 1) as f64
                };
                seeds.push(PlanarState::new(
                    o.x + field.spacing_x() * i as f64 / n as f64,
                    o.y + field.spacing_y() * j as f64 / n as f64,
                    theta,
                ));
            }
        }
    }
    seeds
}

fn dedup(field: &BoulderField, states: Vec<PlanarState>, settings: &SimSettings) -> Vec<PlanarState> {
    let mut unique: Vec<PlanarState> = Vec::new();
    for s in states {
        if !unique.iter().any(|u| {
            same_modulo_lattice(field, u, &s, settings.dedup_tol_xy, settings.dedup_tol_theta)
        }) {
            unique.push(s);
        }
    }
    unique
}

/// Find the rest states that recur every stride on an unbounded field.
///
/// Seeds a grid over one lattice cell and a yaw window, relaxes each seed
/// under `stance`, merges rest states that coincide modulo the lattice, and
/// keeps those that the stride map sends back onto themselves. Rest states
/// from which neither half-stride moves the pair (plateaus) are discarded.
pub fn find_jamming_states(
    config: &PairConfig,
    field: &BoulderField,
    stance: GaitGroup,
    theta_window: f64,
    settings: &SimSettings,
) -> Result<Vec<JammingState>> {
    if !field.is_infinite() {
        return Err(Error::InvalidConfig(
            "jamming search needs an unbounded periodic field".into(),
        ));
    }
    let seeds = seed_states(field, theta_window, settings);
    let rested = seeds
        .par_iter()
        .map(|s| relax(config, field, s, stance, settings).map(|r| r.jammed.state))
        .collect::<Result<Vec<_>>>()?;
    let candidates = dedup(field, rested, settings);
    let images = candidates
        .par_iter()
        .map(|s| stride_map(config, field, s, stance, settings))
        .collect::<Result<Vec<_>>>()?;

    let mut found = Vec::new();
    for (state, (outcome, image)) in candidates.iter().zip(images) {
        let periodic =
            same_modulo_lattice(field, state, &image, settings.dedup_tol_xy, settings.dedup_tol_theta);
        if !periodic || outcome.classification == Classification::NoMotion {
            continue;
        }
        let pose = resolve_pose(config, field, state, stance)?;
        found.push(JammingState::new(config, field, pose, outcome));
    }
    if found.is_empty() {
        Err(Error::EmptyResult)
    } else {
        Ok(found)
    }
}

/// How the connection length is chosen along the course.
#[derive(Debug, Clone, PartialEq)]
pub enum ConnectionPolicy {
    Fixed(f64),
    /// One connection length per terrain segment.
    PerSegment(Vec<f64>),
}

impl ConnectionPolicy {
    fn at(&self, segment: usize) -> f64 {
        match self {
            ConnectionPolicy::Fixed(c) => *c,
            ConnectionPolicy::PerSegment(cs) => cs[segment.min(cs.len() - 1)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrajectoryEvent {
    Touchdown,
    Jammed,
}

impl TrajectoryEvent {
    pub fn label(self) -> &'static str {
        match self {
            TrajectoryEvent::Touchdown => "Touchdown",
            TrajectoryEvent::Jammed => "Jammed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEntry {
    pub stride_index: usize,
    pub state: PlanarState,
    pub z: f64,
    pub alpha: f64,
    pub stance: GaitGroup,
    pub event: TrajectoryEvent,
    pub connection_c: f64,
    pub segment: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub entries: Vec<TrajectoryEntry>,
    /// One outcome per completed stride, index `k - 1` for stride `k`.
    pub strides: Vec<StrideOutcome>,
}

impl Trajectory {
    /// Last jammed state of the rollout.
    pub fn final_state(&self) -> Option<PlanarState> {
        self.entries
            .iter()
            .rev()
            .find(|e| e.event == TrajectoryEvent::Jammed)
            .map(|e| e.state)
    }

    /// Jammed state at the end of each stride, starting with the settled
    /// start (stride 0).
    pub fn stride_end_states(&self) -> Vec<PlanarState> {
        let mut out: Vec<PlanarState> = Vec::new();
        for e in &self.entries {
            if e.event == TrajectoryEvent::Jammed && e.stance == GaitGroup::Group1 {
                out.push(e.state);
            }
        }
        out
    }
}

/// Simulate `n_strides` gait cycles from `start`.
///
/// Stride 0 settles the start under group 1. Each later stride lands group
/// 2, relaxes, lands group 1, relaxes. At every touchdown the field and the
/// connection length are those of the segment containing the CoM.
pub fn rollout(
    params: &RobotParams,
    terrain: &TerrainSegmentList,
    connection: &ConnectionPolicy,
    start: &PlanarState,
    n_strides: usize,
    settings: &SimSettings,
) -> Result<Trajectory> {
    if n_strides == 0 {
        return Err(Error::InvalidRange("rollout needs at least one stride".into()));
    }
    let mut traj = Trajectory::default();
    let mut state = *start;
    let half = |state: &PlanarState,
                    stance: GaitGroup,
                    stride_index: usize,
                    traj: &mut Trajectory|
     -> Result<Relaxation> {
        let segment = terrain.segment_index_at(state.x);
        let field = &terrain.segments()[segment].field;
        let c = connection.at(segment);
        let config = PairConfig::new(*params, c)?;
        let touch = resolve_pose(&config, field, state, stance)?;
        traj.entries.push(TrajectoryEntry {
            stride_index,
            state: *state,
            z: touch.z,
            alpha: touch.alpha,
            stance,
            event: TrajectoryEvent::Touchdown,
            connection_c: c,
            segment,
        });
        let r = relax(&config, field, state, stance, settings)?;
        traj.entries.push(TrajectoryEntry {
            stride_index,
            state: r.jammed.state,
            z: r.jammed.z,
            alpha: r.jammed.alpha,
            stance,
            event: TrajectoryEvent::Jammed,
            connection_c: c,
            segment,
        });
        Ok(r)
    };

    state = half(&state, GaitGroup::Group1, 0, &mut traj)?.jammed.state;
    for k in 1..=n_strides {
        let begin = state;
        let a = half(&state, GaitGroup::Group2, k, &mut traj)?;
        let b = half(&a.jammed.state, GaitGroup::Group1, k, &mut traj)?;
        state = b.jammed.state;
        let segment = terrain.segment_index_at(begin.x);
        traj.strides.push(StrideOutcome::new(
            a.initial_dir,
            b.initial_dir,
            state.position() - begin.position(),
            params,
            &terrain.segments()[segment].field,
            settings,
        ));
    }
    Ok(traj)
}
