//! Pitch-resolved potential energy of the pair resting on the terrain.
//!
//! For a planar state `(X, Y, theta)` and a stance group, the body settles at
//! the lowest CoM height `Z` for which no leg tip penetrates the terrain,
//! with pitch `alpha` free and roll held at zero. For a fixed pitch that
//! height is a closed-form maximum over the eight legs, so the only search
//! is the one-dimensional minimization over `alpha`.

use std::sync::OnceLock;

use nalgebra::{Rotation2, Vector2, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::optimize::golden_section;
use crate::robot::{leg_extension, GaitGroup, LegId, PairConfig, PlanarState, RobotParams, ALL_LEGS};
use crate::terrain::BoulderField;

/// Half-width of the pitch search window (rad).
pub const ALPHA_MAX: f64 = 0.35;
/// Coarse pitch grid spacing (rad).
pub const ALPHA_GRID_STEP: f64 = 0.005;
/// Bracket width at which golden-section refinement of pitch stops (rad).
pub const ALPHA_TOL: f64 = 1e-5;
/// Final bracket width when resolving a two-leg kink of `Z(alpha)` (rad).
const KINK_TOL: f64 = 1e-13;
const KINK_ITERS: usize = 40;
/// Vertical tolerance for contact and penetration checks (m).
pub const EPS_CONTACT: f64 = 1e-6;
/// Finite-difference step for the translational gradient (m), at the
/// default body length. The step scales with the body so that the model
/// stays scale-free.
pub const GRAD_STEP_XY: f64 = 1e-4;
/// Finite-difference step for the yaw gradient (rad).
pub const GRAD_STEP_THETA: f64 = 1e-3;

fn grad_step_xy(config: &PairConfig) -> f64 {
    GRAD_STEP_XY * (config.params.body_len / RobotParams::default().body_len)
}

/// Energy-minimal completion of a planar state.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedPose {
    pub state: PlanarState,
    pub stance: GaitGroup,
    /// Height of the hip plane (and CoM) above the ground plane.
    pub z: f64,
    pub alpha: f64,
    /// Roll; the model holds it at zero.
    pub beta: f64,
    pub energy_e: f64,
    /// Legs whose tips rest on the terrain, in [`ALL_LEGS`] order.
    pub contact_set: Vec<LegId>,
}

/// Per-leg data for one `(config, state, stance)` triple, so repeated pitch
/// evaluations avoid recomputing hips and extensions.
struct SupportProblem<'a> {
    field: &'a BoulderField,
    hips: [Vector2<f64>; 8],
    extensions: [f64; 8],
    /// Tip position with the longitudinal hip offset removed.
    tip_base: [Vector2<f64>; 8],
    /// World-frame longitudinal hip offset, scaled by `cos(alpha)` per pitch.
    tip_axis: [Vector2<f64>; 8],
}

impl<'a> SupportProblem<'a> {
    fn new(
        config: &PairConfig,
        field: &'a BoulderField,
        state: &PlanarState,
        stance: GaitGroup,
    ) -> Self {
        let yaw = Rotation2::new(state.theta);
        let hips = ALL_LEGS.map(|l| config.hip_offset(l));
        Self {
            field,
            hips,
            extensions: ALL_LEGS.map(|l| leg_extension(stance, l, &config.params)),
            tip_base: hips.map(|h| state.position() + yaw * Vector2::new(0.0, h.y)),
            tip_axis: hips.map(|h| yaw * Vector2::new(h.x, 0.0)),
        }
    }

    fn tip(&self, i: usize, cos_a: f64) -> Vector2<f64> {
        self.tip_base[i] + cos_a * self.tip_axis[i]
    }

    /// Lowest CoM height at pitch `alpha` that keeps every tip on or above
    /// the terrain.
    fn support_height(&self, alpha: f64) -> f64 {
        let (sin_a, cos_a) = alpha.sin_cos();
        self.support_height_sc(sin_a, cos_a)
    }

    /// Height leg `i` alone would impose on the CoM.
    fn leg_support(&self, i: usize, alpha: f64) -> f64 {
        let (sin_a, cos_a) = alpha.sin_cos();
        self.field.height_at(self.tip(i, cos_a)) + self.extensions[i] - self.hips[i].x * sin_a
    }

    /// Leg that sets the support height at `alpha`, with that height.
    fn active_leg(&self, alpha: f64) -> (usize, f64) {
        let (sin_a, cos_a) = alpha.sin_cos();
        (0..8)
            .map(|i| {
                let z = self.field.height_at(self.tip(i, cos_a)) + self.extensions[i]
                    - self.hips[i].x * sin_a;
                (i, z)
            })
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
    }

    /// Sharpen a golden-section result whose bracket straddles a kink of
    /// `Z(alpha)`, where two legs trade the support role. The crossing of
    /// those two legs is located by regula falsi, which converges far
    /// faster than further bracketing.
    fn polish_kink(&self, alpha: f64, z: f64, lo: f64, hi: f64) -> (f64, f64) {
        let a = (alpha - ALPHA_TOL).max(lo);
        let b = (alpha + ALPHA_TOL).min(hi);
        let (i, _) = self.active_leg(a);
        let (j, _) = self.active_leg(b);
        if i == j {
            return (alpha, z);
        }
        let g = |t: f64| self.leg_support(i, t) - self.leg_support(j, t);
        let (mut a, mut b) = (a, b);
        let (mut ga, mut gb) = (g(a), g(b));
        if !(ga >= 0.0 && gb <= 0.0) {
            return (alpha, z);
        }
        let mut side = 0;
        for _ in 0..KINK_ITERS {
            if b - a <= KINK_TOL || ga == gb {
                break;
            }
            let c = (a * gb - b * ga) / (gb - ga);
            let gc = g(c);
            if gc > 0.0 {
                a = c;
                ga = gc;
                if side == 1 {
                    gb *= 0.5;
                }
                side = 1;
            } else {
                b = c;
                gb = gc;
                if side == -1 {
                    ga *= 0.5;
                }
                side = -1;
            }
        }
        [a, b]
            .into_iter()
            .map(|t| (t, self.support_height(t)))
            .fold((alpha, z), |best, cand| if cand.1 < best.1 { cand } else { best })
    }

    /// Clearance of each tip above the terrain for CoM height `z`.
    fn clearances(&self, z: f64, alpha: f64) -> [f64; 8] {
        let (sin_a, cos_a) = alpha.sin_cos();
        std::array::from_fn(|i| {
            let tip_z = z + self.hips[i].x * sin_a - self.extensions[i];
            tip_z - self.field.height_at(self.tip(i, cos_a))
        })
    }

    /// Support height with the terrain flattened to the ground plane.
    fn ground_bound(&self, sin_a: f64) -> f64 {
        (0..8)
            .map(|i| self.extensions[i] - self.hips[i].x * sin_a)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn support_height_sc(&self, sin_a: f64, cos_a: f64) -> f64 {
        (0..8)
            .map(|i| {
                self.field.height_at(self.tip(i, cos_a)) + self.extensions[i]
                    - self.hips[i].x * sin_a
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Cheap lower bound on the support height: pitching only slides each
    /// tip by `|hip_x| (1 - cos alpha)` from its zero-pitch position.
    fn lower_bound(&self, sin_a: f64, cos_a: f64, base_dist: &[f64; 8]) -> f64 {
        (0..8)
            .map(|i| {
                let rho = self.hips[i].x.abs() * (1.0 - cos_a);
                self.field.height_at_center_distance(base_dist[i] + rho) + self.extensions[i]
                    - self.hips[i].x * sin_a
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn minimize_pitch(&self) -> (f64, f64) {
        let n = (2.0 * ALPHA_MAX / ALPHA_GRID_STEP).round() as usize;
        let mid = n / 2;
        // Finite fields drop to the ground plane at their edge, so only the
        // ground bound is safe there.
        let base_dist = std::array::from_fn(|i| {
            if self.field.is_infinite() {
                self.field.center_distance(self.tip(i, 1.0))
            } else {
                f64::INFINITY
            }
        });
        let grid = pitch_grid();
        let mut best = (mid, self.support_height_sc(0.0, 1.0));
        // Walk outward from zero pitch so the lower bound prunes most of
        // the window; ties keep the cell closest to zero.
        // The ground bound is convex in sin(alpha); once it rises past the
        // incumbent on one side, nothing further out on that side can win.
        let mut open = [true, true];
        let mut prev_ground = [self.ground_bound(0.0); 2];
        for offset in 1..=mid {
            for (side, k) in [(0, mid + offset), (1, mid - offset)] {
                if !open[side] {
                    continue;
                }
                let (sin_a, cos_a) = grid[k];
                let ground = self.ground_bound(sin_a);
                if ground >= best.1 + 1e-15 && ground >= prev_ground[side] {
                    open[side] = false;
                    continue;
                }
                prev_ground[side] = ground;
                if self.lower_bound(sin_a, cos_a, &base_dist) >= best.1 + 1e-15 {
                    continue;
                }
                let z = self.support_height_sc(sin_a, cos_a);
                if z < best.1 {
                    best = (k, z);
                }
            }
        }
        let center = grid_angle(best.0);
        let lo = (center - ALPHA_GRID_STEP).max(-ALPHA_MAX);
        let hi = (center + ALPHA_GRID_STEP).min(ALPHA_MAX);
        let (a, z) = golden_section(|a| self.support_height(a), lo, hi, ALPHA_TOL);
        let (a, z) = self.polish_kink(a, z, lo, hi);
        if z < best.1 {
            (a, z)
        } else {
            (center, best.1)
        }
    }
}

/// Pitch of coarse grid cell `k`, counted from `-ALPHA_MAX`; the middle
/// cell is exactly zero.
fn grid_angle(k: usize) -> f64 {
    let mid = (ALPHA_MAX / ALPHA_GRID_STEP).round() as i64;
    (k as i64 - mid) as f64 * ALPHA_GRID_STEP
}

/// `(sin, cos)` of every coarse pitch grid angle.
fn pitch_grid() -> &'static [(f64, f64)] {
    static GRID: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    GRID.get_or_init(|| {
        let n = (2.0 * ALPHA_MAX / ALPHA_GRID_STEP).round() as usize;
        (0..=n)
            .map(|k| grid_angle(k).sin_cos())
            .collect()
    })
}

/// Pitch-minimal resting pose of the pair at `state`.
pub fn resolve_pose(
    config: &PairConfig,
    field: &BoulderField,
    state: &PlanarState,
    stance: GaitGroup,
) -> Result<ResolvedPose> {
    if !field.supports(state.position()) {
        return Err(Error::NoSupport {
            x: state.x,
            y: state.y,
        });
    }
    let problem = SupportProblem::new(config, field, state, stance);
    let (alpha, z) = problem.minimize_pitch();
    let clearances = problem.clearances(z, alpha);
    let contact_set = ALL_LEGS
        .iter()
        .zip(clearances)
        .filter(|(_, c)| c.abs() <= EPS_CONTACT)
        .map(|(l, _)| *l)
        .collect();
    Ok(ResolvedPose {
        state: *state,
        stance,
        z,
        alpha,
        beta: 0.0,
        energy_e: config.params.weight() * z,
        contact_set,
    })
}

/// Potential energy at `state`; shorthand for `resolve_pose(..).energy_e`.
pub fn energy_at(
    config: &PairConfig,
    field: &BoulderField,
    state: &PlanarState,
    stance: GaitGroup,
) -> Result<f64> {
    resolve_pose(config, field, state, stance).map(|p| p.energy_e)
}

/// Central-difference gradient `(dE/dX, dE/dY, dE/dtheta)`.
pub fn energy_gradient(
    config: &PairConfig,
    field: &BoulderField,
    state: &PlanarState,
    stance: GaitGroup,
) -> Result<Vector3<f64>> {
    let e = |dx: f64, dy: f64, dt: f64| {
        // Bypass angle normalization so the +/- yaw probes stay symmetric.
        let s = PlanarState {
            x: state.x + dx,
            y: state.y + dy,
            theta: state.theta + dt,
        };
        energy_at(config, field, &s, stance)
    };
    let h = grad_step_xy(config);
    let t = GRAD_STEP_THETA;
    Ok(Vector3::new(
        (e(h, 0.0, 0.0)? - e(-h, 0.0, 0.0)?) / (2.0 * h),
        (e(0.0, h, 0.0)? - e(0.0, -h, 0.0)?) / (2.0 * h),
        (e(0.0, 0.0, t)? - e(0.0, 0.0, -t)?) / (2.0 * t),
    ))
}

/// Resting CoM height at `state`: the energy divided by the weight, but
/// computed without any dependence on mass or gravity.
pub(crate) fn height_at_state(
    config: &PairConfig,
    field: &BoulderField,
    state: &PlanarState,
    stance: GaitGroup,
) -> Result<f64> {
    if !field.supports(state.position()) {
        return Err(Error::NoSupport {
            x: state.x,
            y: state.y,
        });
    }
    Ok(SupportProblem::new(config, field, state, stance).minimize_pitch().1)
}

/// Central-difference gradient of [`height_at_state`], using the same steps
/// as [`energy_gradient`].
pub(crate) fn height_gradient(
    config: &PairConfig,
    field: &BoulderField,
    state: &PlanarState,
    stance: GaitGroup,
) -> Result<Vector3<f64>> {
    let z = |dx: f64, dy: f64, dt: f64| {
        let s = PlanarState {
            x: state.x + dx,
            y: state.y + dy,
            theta: state.theta + dt,
        };
        height_at_state(config, field, &s, stance)
    };
    let h = grad_step_xy(config);
    let t = GRAD_STEP_THETA;
    Ok(Vector3::new(
        (z(h, 0.0, 0.0)? - z(-h, 0.0, 0.0)?) / (2.0 * h),
        (z(0.0, h, 0.0)? - z(0.0, -h, 0.0)?) / (2.0 * h),
        (z(0.0, 0.0, t)? - z(0.0, 0.0, -t)?) / (2.0 * t),
    ))
}

/// Energy sampled along the heading of a reference state.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLandscape1D {
    pub reference: PlanarState,
    pub stance: GaitGroup,
    pub phi_samples: Vec<f64>,
    pub e_values: Vec<f64>,
    pub alpha_values: Vec<f64>,
}

impl EnergyLandscape1D {
    pub fn len(&self) -> usize {
        self.phi_samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi_samples.is_empty()
    }
}

/// Sample positions `phi_min, phi_min + step, ...` up to `phi_max`.
pub(crate) fn sample_grid(phi_min: f64, phi_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidRange(format!("step must be positive, got {step}")));
    }
    if !(phi_max >= phi_min) || !phi_min.is_finite() || !phi_max.is_finite() {
        return Err(Error::InvalidRange(format!(
            "empty range [{phi_min}, {phi_max}]"
        )));
    }
    let n = ((phi_max - phi_min) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| phi_min + k as f64 * step).collect())
}

pub fn landscape_1d(
    config: &PairConfig,
    field: &BoulderField,
    reference: &PlanarState,
    stance: GaitGroup,
    phi_range: (f64, f64),
    step: f64,
) -> Result<EnergyLandscape1D> {
    let phi_samples = sample_grid(phi_range.0, phi_range.1, step)?;
    let poses = phi_samples
        .par_iter()
        .map(|&phi| resolve_pose(config, field, &reference.advanced(phi), stance))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnergyLandscape1D {
        reference: *reference,
        stance,
        e_values: poses.iter().map(|p| p.energy_e).collect(),
        alpha_values: poses.iter().map(|p| p.alpha).collect(),
        phi_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robot::RobotParams;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pair(c: f64) -> PairConfig {
        PairConfig::new(RobotParams::default(), c).unwrap()
    }

    #[test]
    fn flat_ground_pose() {
        let field = BoulderField::flat(0.05);
        let pose = resolve_pose(
            &pair(0.055),
            &field,
            &PlanarState::new(0.3, -0.2, 0.4),
            GaitGroup::Group1,
        )
        .unwrap();
        assert_relative_eq!(pose.z, 0.050, epsilon = 1e-15);
        assert_eq!(pose.alpha, 0.0);
        assert_eq!(pose.beta, 0.0);
        let stance: Vec<_> = GaitGroup::Group1.legs().collect();
        assert_eq!(pose.contact_set, stance);
        assert_relative_eq!(pose.energy_e, 9.81 * 0.05, epsilon = 1e-15);
    }

    #[test]
    fn apex_aligned_pose() {
        // Hip rows 0.063 apart and a 0.063 lattice put every tip on an apex
        // when the CoM sits between boulder rows.
        let field = BoulderField::with_origin(
            0.025,
            0.063,
            0.063,
            Vector2::new(0.0315, 0.0315),
        )
        .unwrap();
        let cfg = pair(0.063);
        let pose = resolve_pose(&cfg, &field, &PlanarState::new(0.0, 0.0, 0.0), GaitGroup::Group1)
            .unwrap();
        assert_relative_eq!(pose.z, 0.075, epsilon = 1e-12);
        assert!(pose.alpha.abs() < 1e-9);
        let g = energy_gradient(&cfg, &field, &PlanarState::new(0.0, 0.0, 0.0), GaitGroup::Group1)
            .unwrap();
        assert!(g.norm() < 1e-9, "gradient {g:?}");
    }

    #[test]
    fn finite_field_outside_extent_has_no_support() {
        let field = BoulderField::adjacent(0.025).unwrap().with_extent(crate::terrain::Extent {
            x_min: 0.0,
            x_max: 1.0,
            y_min: 0.0,
            y_max: 1.0,
        });
        let err = resolve_pose(&pair(0.055), &field, &PlanarState::new(-0.5, 0.5, 0.0), GaitGroup::Group1);
        assert!(matches!(err, Err(Error::NoSupport { .. })));
    }

    #[test]
    fn flat_gradient_vanishes() {
        let g = energy_gradient(
            &pair(0.055),
            &BoulderField::flat(0.05),
            &PlanarState::new(0.01, 0.02, 0.1),
            GaitGroup::Group2,
        )
        .unwrap();
        assert_eq!(g, Vector3::zeros());
    }

    #[test]
    fn flat_landscape_is_constant() {
        let l = landscape_1d(
            &pair(0.055),
            &BoulderField::flat(0.05),
            &PlanarState::new(0.0, 0.0, 0.0),
            GaitGroup::Group1,
            (-0.05, 0.05),
            0.005,
        )
        .unwrap();
        assert_eq!(l.len(), 21);
        assert!(l.e_values.iter().all(|e| *e == l.e_values[0]));
    }

    #[test]
    fn landscape_rejects_bad_ranges() {
        let f = BoulderField::adjacent(0.025).unwrap();
        let s = PlanarState::new(0.0, 0.0, 0.0);
        assert!(landscape_1d(&pair(0.055), &f, &s, GaitGroup::Group1, (0.0, 0.1), 0.0).is_err());
        assert!(landscape_1d(&pair(0.055), &f, &s, GaitGroup::Group1, (0.1, 0.0), 0.01).is_err());
    }

    #[test]
    fn landscape_period() {
        let f = BoulderField::adjacent(0.025).unwrap();
        let s = PlanarState::new(0.0123, 0.0071, 0.0);
        let l = landscape_1d(&pair(0.055), &f, &s, GaitGroup::Group1, (0.0, 0.05), 0.05).unwrap();
        assert!((l.e_values[0] - l.e_values[1]).abs() <= 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn pose_is_supported_and_non_penetrating(x in 0.0f64..0.05, y in 0.0f64..0.05, th in -0.3f64..0.3, c in 0.04f64..0.07, g2 in any::<bool>()) {
            let stance = if g2 { GaitGroup::Group2 } else { GaitGroup::Group1 };
            let cfg = pair(c);
            let field = BoulderField::adjacent(0.025).unwrap();
            let state = PlanarState::new(x, y, th);
            let pose = resolve_pose(&cfg, &field, &state, stance).unwrap();
            let problem = SupportProblem::new(&cfg, &field, &state, stance);
            let clear = problem.clearances(pose.z, pose.alpha);
            let min = clear.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assert!(min >= -EPS_CONTACT);
            prop_assert!(min <= EPS_CONTACT);
            prop_assert!(!pose.contact_set.is_empty());
            // pitch optimality against neighbouring grid cells
            for a in [pose.alpha - ALPHA_GRID_STEP, pose.alpha + ALPHA_GRID_STEP] {
                if a.abs() <= ALPHA_MAX {
                    prop_assert!(pose.z <= problem.support_height(a) + 1e-15);
                }
            }
        }

        #[test]
        fn mass_and_gravity_do_not_move_pose(x in 0.0f64..0.05, y in 0.0f64..0.05, m in 0.1f64..10.0, g in 1.0f64..20.0) {
            let base = pair(0.055);
            let heavy = PairConfig::new(RobotParams { mass_m: m, gravity_g: g, ..base.params }, 0.055).unwrap();
            let field = BoulderField::adjacent(0.025).unwrap();
            let s = PlanarState::new(x, y, 0.05);
            let a = resolve_pose(&base, &field, &s, GaitGroup::Group1).unwrap();
            let b = resolve_pose(&heavy, &field, &s, GaitGroup::Group1).unwrap();
            prop_assert_eq!(a.z, b.z);
            prop_assert_eq!(a.alpha, b.alpha);
            prop_assert_eq!(a.contact_set, b.contact_set);
        }

        #[test]
        fn energy_lattice_periodic(x in 0.0f64..0.05, y in 0.0f64..0.05, th in -0.3f64..0.3, k in -3i32..3, l in -3i32..3) {
            let cfg = pair(0.055);
            let field = BoulderField::adjacent(0.025).unwrap();
            let s = PlanarState::new(x, y, th);
            let t = s.translated(Vector2::new(k as f64 * 0.05, l as f64 * 0.05));
            let ea = energy_at(&cfg, &field, &s, GaitGroup::Group1).unwrap();
            let eb = energy_at(&cfg, &field, &t, GaitGroup::Group1).unwrap();
            prop_assert!((ea - eb).abs() <= 1e-9, "{} vs {}", ea, eb);
        }

        #[test]
        fn gradient_lattice_periodic(x in 0.0f64..0.05, y in 0.0f64..0.05, th in -0.3f64..0.3) {
            let cfg = pair(0.055);
            let field = BoulderField::adjacent(0.025).unwrap();
            let s = PlanarState::new(x, y, th);
            let t = s.translated(Vector2::new(0.05, -0.10));
            let ga = energy_gradient(&cfg, &field, &s, GaitGroup::Group2).unwrap();
            let gb = energy_gradient(&cfg, &field, &t, GaitGroup::Group2).unwrap();
            prop_assert!((ga - gb).norm() <= 1e-4 * (1.0 + ga.norm()), "{:?} vs {:?}", ga, gb);
        }
    }
}
