//! Analytic heightfield for a periodic lattice of semispherical boulders.
//!
//! Boulders are hemispheres of radius `r` sitting on a flat plane, with
//! centers on a rectangular lattice. Because `spacing >= 2r` the footprints
//! never overlap, so the height at a point is determined entirely by the
//! nearest lattice center, which is found by rounding.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance from a footprint circle below which the surface gradient is
/// treated as unbounded.
pub const EPS_EDGE: f64 = 1e-6;

/// Axis-aligned rectangle limiting a finite boulder field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Extent {
    pub fn contains(&self, p: Vector2<f64>) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }
}

/// A rectangular lattice of semispherical boulders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoulderField {
    radius: f64,
    spacing_x: f64,
    spacing_y: f64,
    origin: Vector2<f64>,
    extent: Option<Extent>,
    inv_spacing: Vector2<f64>,
}

impl BoulderField {
    pub fn new(radius: f64, spacing_x: f64, spacing_y: f64) -> Result<Self> {
        Self::with_origin(radius, spacing_x, spacing_y, Vector2::zeros())
    }

    /// Adjacent-packed square lattice (`spacing = 2r`), the dense default field.
    pub fn adjacent(radius: f64) -> Result<Self> {
        Self::new(radius, 2.0 * radius, 2.0 * radius)
    }

    pub fn with_origin(
        radius: f64,
        spacing_x: f64,
        spacing_y: f64,
        origin: Vector2<f64>,
    ) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "boulder radius must be positive, got {radius}"
            )));
        }
        if !(spacing_x > 0.0 && spacing_y > 0.0 && spacing_x.is_finite() && spacing_y.is_finite())
        {
            return Err(Error::InvalidConfig(format!(
                "boulder spacing must be positive, got ({spacing_x}, {spacing_y})"
            )));
        }
        // Allow a relative hair of slack so that 2r computed in floating
        // point still counts as adjacent packing.
        let min_spacing = 2.0 * radius * (1.0 - 1e-12);
        if spacing_x < min_spacing || spacing_y < min_spacing {
            return Err(Error::InvalidConfig(format!(
                "boulders overlap: spacing ({spacing_x}, {spacing_y}) < diameter {}",
                2.0 * radius
            )));
        }
        Ok(Self {
            radius,
            spacing_x,
            spacing_y,
            origin,
            extent: None,
            inv_spacing: Vector2::new(1.0 / spacing_x, 1.0 / spacing_y),
        })
    }

    /// A field without any boulders: flat ground everywhere.
    ///
    /// The lattice spacing is kept only so that periodicity-based code paths
    /// (seed grids, lattice reduction) still have a cell to work with.
    pub fn flat(spacing: f64) -> Self {
        Self {
            radius: 0.0,
            spacing_x: spacing,
            spacing_y: spacing,
            origin: Vector2::zeros(),
            extent: None,
            inv_spacing: Vector2::new(1.0 / spacing, 1.0 / spacing),
        }
    }

    pub fn with_extent(mut self, extent: Extent) -> Self {
        self.extent = Some(extent);
        self
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn spacing_x(&self) -> f64 {
        self.spacing_x
    }

    pub fn spacing_y(&self) -> f64 {
        self.spacing_y
    }

    pub fn origin(&self) -> Vector2<f64> {
        self.origin
    }

    pub fn extent(&self) -> Option<Extent> {
        self.extent
    }

    pub fn is_flat(&self) -> bool {
        self.radius == 0.0
    }

    pub fn is_infinite(&self) -> bool {
        self.extent.is_none()
    }

    /// Whether `p` lies on the supported part of the field.
    pub fn supports(&self, p: Vector2<f64>) -> bool {
        self.extent.map_or(true, |e| e.contains(p))
    }

    /// Copy of this field with every length multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            radius: self.radius * k,
            spacing_x: self.spacing_x * k,
            spacing_y: self.spacing_y * k,
            origin: self.origin * k,
            extent: self.extent.map(|e| Extent {
                x_min: e.x_min * k,
                x_max: e.x_max * k,
                y_min: e.y_min * k,
                y_max: e.y_max * k,
            }),
            inv_spacing: Vector2::new(1.0 / (self.spacing_x * k), 1.0 / (self.spacing_y * k)),
        }
    }

    /// Center of the boulder nearest to `p`.
    pub fn nearest_center(&self, p: Vector2<f64>) -> Vector2<f64> {
        let i = round_half_away((p.x - self.origin.x) * self.inv_spacing.x);
        let j = round_half_away((p.y - self.origin.y) * self.inv_spacing.y);
        Vector2::new(
            self.origin.x + i * self.spacing_x,
            self.origin.y + j * self.spacing_y,
        )
    }

    /// Offset from the nearest boulder center to `p`.
    fn local_offset(&self, p: Vector2<f64>) -> Vector2<f64> {
        p - self.nearest_center(p)
    }

    pub fn height_at(&self, p: Vector2<f64>) -> f64 {
        if self.radius == 0.0 || (self.extent.is_some() && !self.supports(p)) {
            return 0.0;
        }
        let d2 = self.local_offset(p).norm_squared();
        let r2 = self.radius * self.radius;
        if d2 >= r2 {
            0.0
        } else {
            (r2 - d2).sqrt()
        }
    }

    /// Slope of the surface at `p`.
    ///
    /// Fails with [`Error::FootprintBoundary`] within [`EPS_EDGE`] of a
    /// footprint circle, where the hemisphere has a vertical tangent.
    pub fn surface_gradient_at(&self, p: Vector2<f64>) -> Result<Vector2<f64>> {
        if self.is_flat() || !self.supports(p) {
            return Ok(Vector2::zeros());
        }
        let off = self.local_offset(p);
        let d = off.norm();
        if (d - self.radius).abs() <= EPS_EDGE {
            return Err(Error::FootprintBoundary {
                x: p.x,
                y: p.y,
                distance: (d - self.radius).abs(),
            });
        }
        if d > self.radius || d == 0.0 {
            return Ok(Vector2::zeros());
        }
        let h = (self.radius * self.radius - d * d).sqrt();
        Ok(-off / h)
    }

    /// Distance from `p` to the nearest boulder center.
    pub fn center_distance(&self, p: Vector2<f64>) -> f64 {
        self.local_offset(p).norm()
    }

    /// Hemisphere height at horizontal distance `d` from a center.
    ///
    /// Because center distance is 1-Lipschitz, `height_at_center_distance(
    /// center_distance(p) + rho)` bounds the height of an infinite field
    /// from below anywhere within `rho` of `p`.
    pub fn height_at_center_distance(&self, d: f64) -> f64 {
        if d >= self.radius {
            0.0
        } else {
            (self.radius * self.radius - d * d).sqrt()
        }
    }

    /// Unsigned distance from `p` to the nearest footprint circle.
    pub fn edge_distance_at(&self, p: Vector2<f64>) -> f64 {
        let d = self.local_offset(p).norm();
        (d - self.radius).abs()
    }

    /// Reduce a displacement to its residual modulo the lattice.
    pub fn lattice_residual(&self, delta: Vector2<f64>) -> Vector2<f64> {
        Vector2::new(
            delta.x - (delta.x / self.spacing_x).round() * self.spacing_x,
            delta.y - (delta.y / self.spacing_y).round() * self.spacing_y,
        )
    }
}

/// `f64::round` without the libm call on targets lacking SSE4.1; this sits
/// on the innermost loop of every pose evaluation.
#[inline]
fn round_half_away(t: f64) -> f64 {
    if t.abs() >= 4.0e15 {
        return t.round();
    }
    if t >= 0.0 {
        (t + 0.5) as i64 as f64
    } else {
        -((-t + 0.5) as i64 as f64)
    }
}

/// One stretch of terrain along x.
#[derive(Debug, Clone, PartialEq)]
pub struct TerrainSegment {
    pub x_start: f64,
    pub x_end: f64,
    pub field: BoulderField,
}

/// Contiguous boulder fields laid out along the direction of travel.
#[derive(Debug, Clone, PartialEq)]
pub struct TerrainSegmentList {
    segments: Vec<TerrainSegment>,
}

impl TerrainSegmentList {
    pub fn new(segments: Vec<TerrainSegment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidConfig("segment list is empty".into()));
        }
        for (i, seg) in segments.iter().enumerate() {
            if !(seg.x_end > seg.x_start) {
                return Err(Error::InvalidConfig(format!(
                    "segment {i}: x_end {} must exceed x_start {}",
                    seg.x_end, seg.x_start
                )));
            }
            let width = seg.x_end - seg.x_start;
            if width < seg.field.spacing_x() * (1.0 - 1e-9) {
                return Err(Error::InvalidConfig(format!(
                    "segment {i}: width {width} is narrower than one lattice period {}",
                    seg.field.spacing_x()
                )));
            }
            if i > 0 {
                let prev = &segments[i - 1];
                if (seg.x_start - prev.x_end).abs() > 1e-12 {
                    return Err(Error::InvalidConfig(format!(
                        "segment {i} starts at {} but segment {} ends at {}",
                        seg.x_start,
                        i - 1,
                        prev.x_end
                    )));
                }
            }
        }
        Ok(Self { segments })
    }

    /// A single unbounded field.
    pub fn uniform(field: BoulderField) -> Self {
        Self {
            segments: vec![TerrainSegment {
                x_start: f64::NEG_INFINITY,
                x_end: f64::INFINITY,
                field,
            }],
        }
    }

    pub fn segments(&self) -> &[TerrainSegment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Index of the segment governing position `x`. Positions before the
    /// first segment or past the last one fall to the nearest end segment.
    pub fn segment_index_at(&self, x: f64) -> usize {
        self.segments
            .iter()
            .position(|s| x < s.x_end)
            .unwrap_or(self.segments.len() - 1)
    }

    pub fn field_at(&self, x: f64) -> &BoulderField {
        &self.segments[self.segment_index_at(x)].field
    }
}
