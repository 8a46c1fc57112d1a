//! Test-only reference implementations, written from the geometric
//! description of the pair rather than from the library code.

#![allow(dead_code)]

use nalgebra::{Rotation3, Vector3};

use boulder_traverse::robot::{PlanarState, RobotParams};

pub const STANCE_1: [&str; 4] = ["LF1", "RH1", "LF2", "RH2"];

/// Square or rectangular hemisphere lattice.
#[derive(Debug, Clone, Copy)]
pub struct Lattice {
    pub radius: f64,
    pub sx: f64,
    pub sy: f64,
    pub ox: f64,
    pub oy: f64,
}

impl Lattice {
    pub fn dense() -> Self {
        Self { radius: 0.025, sx: 0.05, sy: 0.05, ox: 0.0, oy: 0.0 }
    }

    /// Highest hemisphere over `(x, y)`, checking the surrounding block of
    /// centers explicitly.
    pub fn height(&self, x: f64, y: f64) -> f64 {
        let i0 = ((x - self.ox) / self.sx).floor() as i64;
        let j0 = ((y - self.oy) / self.sy).floor() as i64;
        let mut best: f64 = 0.0;
        for i in i0 - 1..=i0 + 2 {
            for j in j0 - 1..=j0 + 2 {
                let cx = self.ox + i as f64 * self.sx;
                let cy = self.oy + j as f64 * self.sy;
                let d2 = (x - cx).powi(2) + (y - cy).powi(2);
                if d2 < self.radius * self.radius {
                    best = best.max((self.radius * self.radius - d2).sqrt());
                }
            }
        }
        best
    }

    /// Distance from `(x, y)` to the closest footprint circle.
    pub fn edge_distance(&self, x: f64, y: f64) -> f64 {
        let i0 = ((x - self.ox) / self.sx).floor() as i64;
        let j0 = ((y - self.oy) / self.sy).floor() as i64;
        let mut best = f64::INFINITY;
        for i in i0 - 1..=i0 + 2 {
            for j in j0 - 1..=j0 + 2 {
                let cx = self.ox + i as f64 * self.sx;
                let cy = self.oy + j as f64 * self.sy;
                let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
                best = best.min((d - self.radius).abs());
            }
        }
        best
    }
}

/// One leg: name, hip in the pair body frame, and whether it belongs to
/// the stance group `{LF1, RH1, LF2, RH2}`.
pub struct Leg {
    pub name: &'static str,
    pub hip: Vector3<f64>,
    pub group1: bool,
}

/// Hips sit at the corners of two `len x width` bodies separated by a
/// clear gap `c`, with the pair's CoM midway in the gap.
pub fn legs(p: &RobotParams, c: f64) -> Vec<Leg> {
    let (l, w) = (p.body_len, p.body_width);
    let front1 = c / 2.0 + l;
    let hind1 = c / 2.0;
    let front2 = -c / 2.0;
    let hind2 = -c / 2.0 - l;
    let mk = |name, x: f64, y: f64, group1| Leg { name, hip: Vector3::new(x, y, 0.0), group1 };
    vec![
        mk("LF1", front1, w / 2.0, true),
        mk("RF1", front1, -w / 2.0, false),
        mk("LH1", hind1, w / 2.0, false),
        mk("RH1", hind1, -w / 2.0, true),
        mk("LF2", front2, w / 2.0, true),
        mk("RF2", front2, -w / 2.0, false),
        mk("LH2", hind2, w / 2.0, false),
        mk("RH2", hind2, -w / 2.0, true),
    ]
}

/// Rigid-body placement of the hip: pitch `alpha` (nose up for positive
/// values) about the lateral axis through the CoM, then yaw.
fn hip_world(s: &PlanarState, alpha: f64, hip: &Vector3<f64>) -> Vector3<f64> {
    let pitch = Rotation3::from_axis_angle(&Vector3::y_axis(), -alpha);
    let yaw = Rotation3::from_axis_angle(&Vector3::z_axis(), s.theta);
    yaw * (pitch * hip)
}

/// Lowest CoM height at fixed pitch that keeps every vertical peg tip on or
/// above the terrain.
pub fn required_height(
    lat: &Lattice,
    p: &RobotParams,
    c: f64,
    s: &PlanarState,
    alpha: f64,
    stance_group1: bool,
) -> f64 {
    legs(p, c)
        .iter()
        .map(|leg| {
            let h = hip_world(s, alpha, &leg.hip);
            let ext = if leg.group1 == stance_group1 {
                p.leg_len_extended
            } else {
                p.leg_len_extended - p.leg_stroke
            };
            lat.height(s.x + h.x, s.y + h.y) - h.z + ext
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Minimum of `required_height` over pitch by exhaustive grids: 1e-3 rad
/// across the window, then successively finer grids around the best few
/// cells.
pub fn oracle_height(
    lat: &Lattice,
    p: &RobotParams,
    c: f64,
    s: &PlanarState,
    stance_group1: bool,
) -> (f64, f64) {
    let f = |a: f64| required_height(lat, p, c, s, a, stance_group1);
    let mut coarse: Vec<(f64, f64)> = (0..=700)
        .map(|k| {
            let a = -0.35 + k as f64 * 1e-3;
            (a, f(a))
        })
        .collect();
    coarse.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let mut best = coarse[0];
    for &(a0, _) in coarse.iter().take(3) {
        let mut center = a0;
        let mut half = 1e-3;
        for _ in 0..4 {
            let step = half / 100.0;
            let mut local = (center, f(center));
            for k in -100..=100 {
                let a = (center + k as f64 * step).clamp(-0.35, 0.35);
                let z = f(a);
                if z < local.1 {
                    local = (a, z);
                }
            }
            center = local.0;
            half = step;
            if local.1 < best.1 {
                best = local;
            }
        }
    }
    (best.0, best.1)
}

/// Energy by the ΔZ = 1e-5 m feasibility scan: the smallest grid height
/// at or above the required height.
pub fn oracle_energy_scan(lat: &Lattice, p: &RobotParams, c: f64, s: &PlanarState, stance_group1: bool) -> f64 {
    let (_, z) = oracle_height(lat, p, c, s, stance_group1);
    let dz = 1e-5;
    p.mass_m * p.gravity_g * (z / dz).ceil() * dz
}

/// Unquantized oracle energy, for finite differences.
pub fn oracle_energy(lat: &Lattice, p: &RobotParams, c: f64, s: &PlanarState, stance_group1: bool) -> f64 {
    p.mass_m * p.gravity_g * oracle_height(lat, p, c, s, stance_group1).1
}

/// Central differences of the oracle energy with the library's steps.
pub fn oracle_gradient(lat: &Lattice, p: &RobotParams, c: f64, s: &PlanarState, stance_group1: bool) -> Vector3<f64> {
    let e = |dx: f64, dy: f64, dt: f64| {
        let q = PlanarState { x: s.x + dx, y: s.y + dy, theta: s.theta + dt };
        oracle_energy(lat, p, c, &q, stance_group1)
    };
    let (h, t) = (1e-4, 1e-3);
    Vector3::new(
        (e(h, 0.0, 0.0) - e(-h, 0.0, 0.0)) / (2.0 * h),
        (e(0.0, h, 0.0) - e(0.0, -h, 0.0)) / (2.0 * h),
        (e(0.0, 0.0, t) - e(0.0, 0.0, -t)) / (2.0 * t),
    )
}

/// Smallest distance from any peg tip to a footprint circle over the
/// gradient stencil, at the oracle's optimal pitch.
pub fn stencil_edge_clearance(lat: &Lattice, p: &RobotParams, c: f64, s: &PlanarState, stance_group1: bool) -> f64 {
    let mut worst = f64::INFINITY;
    for (dx, dy, dt) in [(0.0, 0.0, 0.0), (1e-4, 0.0, 0.0), (-1e-4, 0.0, 0.0), (0.0, 1e-4, 0.0), (0.0, -1e-4, 0.0), (0.0, 0.0, 1e-3), (0.0, 0.0, -1e-3)] {
        let q = PlanarState { x: s.x + dx, y: s.y + dy, theta: s.theta + dt };
        let (a, _) = oracle_height(lat, p, c, &q, stance_group1);
        for leg in legs(p, c) {
            let h = hip_world(&q, a, &leg.hip);
            worst = worst.min(lat.edge_distance(q.x + h.x, q.y + h.y));
        }
    }
    worst
}
