//! Experiment configuration files (TOML).
//!
//! Every block is optional except `[terrain]`; omitted fields take the
//! defaults of the corresponding model type. Unknown keys are rejected.
//! See `configs/SCHEMA.md` for the full key reference.

use std::path::Path;

use nalgebra::Vector2;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::planner::{CRange, SelectionMode};
use crate::quasistatic::SimSettings;
use crate::robot::{GaitGroup, PairConfig, PlanarState, RobotParams};
use crate::terrain::{BoulderField, TerrainSegment, TerrainSegmentList};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub robot: RobotParams,
    #[serde(default)]
    pub pair: PairBlock,
    pub terrain: TerrainBlock,
    #[serde(default)]
    pub sweep: SweepBlock,
    #[serde(default)]
    pub landscape: LandscapeBlock,
    #[serde(default)]
    pub rollout: RolloutBlock,
    #[serde(default)]
    pub settings: SimSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairBlock {
    pub connection_c: f64,
}

impl Default for PairBlock {
    fn default() -> Self {
        Self { connection_c: 0.055 }
    }
}

/// Either one unbounded lattice (`radius` + `spacing`) or a list of
/// `[[terrain.segments]]`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerrainBlock {
    pub radius: Option<f64>,
    /// Square lattice spacing; shorthand for equal `spacing_x`/`spacing_y`.
    pub spacing: Option<f64>,
    pub spacing_x: Option<f64>,
    pub spacing_y: Option<f64>,
    /// Lattice origin `[x, y]` (a boulder center).
    pub origin: Option<[f64; 2]>,
    /// No boulders at all.
    #[serde(default)]
    pub flat: bool,
    pub segments: Option<Vec<SegmentBlock>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentBlock {
    pub x_start: f64,
    pub x_end: f64,
    /// Defaults to the terrain-level radius.
    pub radius: Option<f64>,
    pub spacing: Option<f64>,
    pub spacing_x: Option<f64>,
    pub spacing_y: Option<f64>,
    /// Defaults to `[x_start + spacing_x / 2, 0]`, so the first column of
    /// boulders sits half a period inside the segment.
    pub origin: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepBlock {
    pub c_min: f64,
    pub c_max: f64,
    pub c_step: f64,
    pub mode: SelectionMode,
}

impl Default for SweepBlock {
    fn default() -> Self {
        let r = CRange::default();
        Self {
            c_min: r.c_min,
            c_max: r.c_max,
            c_step: r.c_step,
            mode: SelectionMode::default(),
        }
    }
}

impl SweepBlock {
    pub fn range(&self) -> CRange {
        CRange {
            c_min: self.c_min,
            c_max: self.c_max,
            c_step: self.c_step,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeBlock {
    /// Reference state `[x, y, theta]`. When absent, the first jamming
    /// state of the configured pair is used.
    pub reference: Option<[f64; 3]>,
    pub stance: StanceName,
    pub phi_min: f64,
    pub phi_max: f64,
    pub phi_step: f64,
}

impl Default for LandscapeBlock {
    fn default() -> Self {
        Self {
            reference: None,
            stance: StanceName::Group1,
            phi_min: -0.05,
            phi_max: 0.05,
            phi_step: 0.0005,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StanceName {
    Group1,
    Group2,
}

impl From<StanceName> for GaitGroup {
    fn from(s: StanceName) -> Self {
        match s {
            StanceName::Group1 => GaitGroup::Group1,
            StanceName::Group2 => GaitGroup::Group2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectionChoice {
    /// `pair.connection_c` everywhere.
    #[default]
    Fixed,
    /// Plan one length per segment over the `[sweep]` range.
    Planned,
    /// Use `rollout.schedule`, one length per segment.
    Schedule,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RolloutBlock {
    pub strides: usize,
    /// Start state `[x, y, theta]`.
    pub start: [f64; 3],
    pub connection: ConnectionChoice,
    pub schedule: Option<Vec<f64>>,
}

impl Default for RolloutBlock {
    fn default() -> Self {
        Self {
            strides: 10,
            start: [0.0, 0.0, 0.0],
            connection: ConnectionChoice::Fixed,
            schedule: None,
        }
    }
}

impl ExperimentConfig {
    /// Parse and validate TOML text. `origin` names the source in messages.
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            Error::InvalidConfig(format!("{origin}: {}", e.to_string().trim_end()))
        })?;
        cfg.validate()
            .map_err(|e| match e {
                Error::InvalidConfig(m) => Error::InvalidConfig(format!("{origin}: {m}")),
                Error::InvalidRange(m) => Error::InvalidRange(format!("{origin}: {m}")),
                other => other,
            })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidConfig(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        self.robot.validate()?;
        self.pair_config()?;
        self.settings.validate()?;
        self.segments()?;
        self.sweep.range().validate()?;
        if self.rollout.strides == 0 {
            return Err(Error::InvalidConfig("rollout.strides must be at least 1".into()));
        }
        let l = &self.landscape;
        if !(l.phi_step > 0.0) || !(l.phi_min < l.phi_max) {
            return Err(Error::InvalidRange(format!(
                "landscape needs phi_min < phi_max and phi_step > 0, got [{}, {}] step {}",
                l.phi_min, l.phi_max, l.phi_step
            )));
        }
        match (self.rollout.connection, &self.rollout.schedule) {
            (ConnectionChoice::Schedule, None) => {
                return Err(Error::InvalidConfig(
                    "rollout.connection = \"schedule\" requires rollout.schedule".into(),
                ))
            }
            (ConnectionChoice::Schedule, Some(s)) => {
                let n = self.segments()?.len();
                if s.len() != n {
                    return Err(Error::InvalidConfig(format!(
                        "rollout.schedule has {} entries but the terrain has {n} segments",
                        s.len()
                    )));
                }
                if let Some((i, c)) = s.iter().enumerate().find(|(_, c)| !(**c > 0.0)) {
                    return Err(Error::InvalidConfig(format!(
                        "rollout.schedule[{i}] must be positive, got {c}"
                    )));
                }
            }
            (_, Some(_)) => {
                return Err(Error::InvalidConfig(
                    "rollout.schedule is only used with rollout.connection = \"schedule\"".into(),
                ))
            }
            _ => {}
        }
        Ok(())
    }

    pub fn pair_config(&self) -> Result<PairConfig> {
        PairConfig::new(self.robot, self.pair.connection_c)
            .map_err(|e| prefix(e, "pair.connection_c"))
    }

    /// The single unbounded field, when the terrain is not segmented.
    pub fn field(&self) -> Result<BoulderField> {
        let t = &self.terrain;
        if t.segments.is_some() {
            return Err(Error::InvalidConfig(
                "this command needs a single unbounded field, but [[terrain.segments]] are given"
                    .into(),
            ));
        }
        lattice(
            "terrain",
            t.flat,
            t.radius,
            t.spacing,
            t.spacing_x,
            t.spacing_y,
            t.origin.unwrap_or([0.0, 0.0]),
        )
    }

    /// Terrain as a segment list; a single field becomes one unbounded
    /// segment.
    pub fn segments(&self) -> Result<TerrainSegmentList> {
        let t = &self.terrain;
        let Some(segs) = &t.segments else {
            return Ok(TerrainSegmentList::uniform(self.field()?));
        };
        if t.spacing.is_some() || t.spacing_x.is_some() || t.spacing_y.is_some() || t.origin.is_some() {
            return Err(Error::InvalidConfig(
                "terrain: give either a lattice (spacing/origin) or [[terrain.segments]], not both"
                    .into(),
            ));
        }
        let mut out = Vec::with_capacity(segs.len());
        for (i, s) in segs.iter().enumerate() {
            let ctx = format!("terrain.segments[{i}]");
            let sx = s.spacing_x.or(s.spacing);
            let origin = s
                .origin
                .unwrap_or([s.x_start + 0.5 * sx.unwrap_or(0.0), 0.0]);
            let field = lattice(
                &ctx,
                t.flat,
                s.radius.or(t.radius),
                s.spacing,
                s.spacing_x,
                s.spacing_y,
                origin,
            )?;
            out.push(TerrainSegment {
                x_start: s.x_start,
                x_end: s.x_end,
                field,
            });
        }
        TerrainSegmentList::new(out).map_err(|e| prefix(e, "terrain"))
    }

    pub fn start_state(&self) -> PlanarState {
        let [x, y, t] = self.rollout.start;
        PlanarState::new(x, y, t)
    }
}

fn lattice(
    ctx: &str,
    flat: bool,
    radius: Option<f64>,
    spacing: Option<f64>,
    spacing_x: Option<f64>,
    spacing_y: Option<f64>,
    origin: [f64; 2],
) -> Result<BoulderField> {
    if spacing.is_some() && (spacing_x.is_some() || spacing_y.is_some()) {
        return Err(Error::InvalidConfig(format!(
            "{ctx}: give spacing or spacing_x/spacing_y, not both"
        )));
    }
    let sx = spacing_x.or(spacing);
    let sy = spacing_y.or(spacing);
    let (Some(sx), Some(sy)) = (sx, sy) else {
        return Err(Error::InvalidConfig(format!("{ctx}: missing field `spacing`")));
    };
    if flat {
        if radius.is_some() {
            return Err(Error::InvalidConfig(format!("{ctx}: a flat field takes no radius")));
        }
        if !(sx > 0.0 && sx == sy) {
            return Err(Error::InvalidConfig(format!(
                "{ctx}: a flat field needs one positive spacing"
            )));
        }
        return Ok(BoulderField::flat(sx));
    }
    let Some(r) = radius else {
        return Err(Error::InvalidConfig(format!("{ctx}: missing field `radius`")));
    };
    BoulderField::with_origin(r, sx, sy, Vector2::new(origin[0], origin[1])).map_err(|e| prefix(e, ctx))
}

fn prefix(e: Error, ctx: &str) -> Error {
    match e {
        Error::InvalidConfig(m) => Error::InvalidConfig(format!("{ctx}: {m}")),
        other => other,
    }
}
