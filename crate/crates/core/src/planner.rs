//! Connection-length sweeps and selection.
//!
//! A connection length counts as traversable on a field only if every
//! stride-periodic rest state found there produces aligned half-stride
//! directions and a stride of real length.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quasistatic::{find_jamming_states, Classification, JammingState, SimSettings};
use crate::robot::{GaitGroup, PairConfig, RobotParams};
use crate::terrain::{BoulderField, TerrainSegmentList};

/// Connection lengths `c_min, c_min + c_step, ...` up to `c_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CRange {
    pub c_min: f64,
    pub c_max: f64,
    pub c_step: f64,
}

impl Default for CRange {
    fn default() -> Self {
        Self {
            c_min: 0.040,
            c_max: 0.070,
            c_step: 0.001,
        }
    }
}

impl CRange {
    pub fn new(c_min: f64, c_max: f64, c_step: f64) -> Result<Self> {
        let r = Self { c_min, c_max, c_step };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.c_min.is_finite() && self.c_max.is_finite() && self.c_step.is_finite();
        if !finite || !(self.c_min > 0.0 && self.c_min < self.c_max) {
            return Err(Error::InvalidRange(format!(
                "need 0 < c_min < c_max, got c_min = {}, c_max = {}",
                self.c_min, self.c_max
            )));
        }
        if !(self.c_step > 0.0) {
            return Err(Error::InvalidRange(format!("c_step must be positive, got {}", self.c_step)));
        }
        Ok(())
    }

    /// Grid values, snapped to 1e-12 m so that nested grids (a step and a
    /// tenth of it) produce identical values where they overlap.
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.c_max - self.c_min) / self.c_step + 1e-9).floor() as usize;
        (0..=n)
            .map(|k| snap(self.c_min + k as f64 * self.c_step))
            .collect()
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            c_min: self.c_min * k,
            c_max: self.c_max * k,
            c_step: self.c_step * k,
        }
    }
}

fn snap(c: f64) -> f64 {
    (c * 1e12).round() / 1e12
}

/// Model verdict for one connection length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraversabilityRow {
    pub connection_c: f64,
    pub connection_c_ubl: f64,
    /// Worst (smallest) `v1 . v2` over the jamming states.
    pub dot_v1v2: f64,
    /// Stride length from the first jamming state, in body lengths.
    pub displacement_ubl: f64,
    pub classification: Classification,
    pub jamming_count: usize,
}

impl TraversabilityRow {
    pub fn is_feasible(&self) -> bool {
        self.classification == Classification::Traversing
    }
}

/// Rows sorted by connection length.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraversabilityReport {
    pub rows: Vec<TraversabilityRow>,
}

impl TraversabilityReport {
    pub fn row_at(&self, c: f64) -> Option<&TraversabilityRow> {
        self.rows.iter().find(|r| (r.connection_c - c).abs() < 1e-10)
    }

    /// Connection lengths classified as traversing.
    pub fn traversing(&self) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.is_feasible())
            .map(|r| r.connection_c)
            .collect()
    }
}

/// How [`select_connection_length`] picks among feasible lengths.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Smallest feasible length, scanning upward and stopping at the first
    /// success.
    #[default]
    FirstFeasible,
    /// Feasible length with the longest stride. Evaluates the whole range.
    LongestStride,
}

/// Classify a single connection length on an unbounded field.
pub fn evaluate_connection(
    field: &BoulderField,
    params: &RobotParams,
    c: f64,
    settings: &SimSettings,
) -> Result<TraversabilityRow> {
    let config = PairConfig::new(*params, c)?;
    let states = find_jamming_states(&config, field, GaitGroup::Group1, settings.theta_window, settings);
    summarize_jamming(params, c, states)
}

/// Reduce the outcome of a jamming search at connection length `c` to a
/// report row. An empty search is a `NoMotion` row with no states.
pub fn summarize_jamming(
    params: &RobotParams,
    c: f64,
    states: Result<Vec<JammingState>>,
) -> Result<TraversabilityRow> {
    let mut row = TraversabilityRow {
        connection_c: c,
        connection_c_ubl: c / params.ubl(),
        dot_v1v2: 0.0,
        displacement_ubl: 0.0,
        classification: Classification::NoMotion,
        jamming_count: 0,
    };
    let states = match states {
        Ok(s) if !s.is_empty() => s,
        Ok(_) | Err(Error::EmptyResult) => return Ok(row),
        Err(e) => return Err(e),
    };
    row.jamming_count = states.len();
    row.dot_v1v2 = states
        .iter()
        .map(|s| s.outcome.dot_v1v2)
        .fold(f64::INFINITY, f64::min);
    row.displacement_ubl = states[0].outcome.displacement_ubl;
    row.classification = if states
        .iter()
        .all(|s| s.outcome.classification == Classification::Traversing)
    {
        Classification::Traversing
    } else {
        Classification::Stuck
    };
    Ok(row)
}

/// Evaluate every connection length of `range` on `field`.
pub fn sweep_connection_lengths(
    field: &BoulderField,
    params: &RobotParams,
    range: &CRange,
    settings: &SimSettings,
) -> Result<TraversabilityReport> {
    range.validate()?;
    let rows = range
        .values()
        .par_iter()
        .map(|&c| evaluate_connection(field, params, c, settings))
        .collect::<Result<Vec<_>>>()?;
    Ok(TraversabilityReport { rows })
}

/// Chosen connection length with the evidence behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub chosen_c: f64,
    /// Rows evaluated up to and including the chosen length (the whole
    /// range for [`SelectionMode::LongestStride`]).
    pub report: TraversabilityReport,
}

impl Selection {
    pub fn chosen_row(&self) -> &TraversabilityRow {
        self.report
            .row_at(self.chosen_c)
            .expect("chosen length is always part of the report")
    }
}

/// Pick a connection length whose every jamming state traverses.
pub fn select_connection_length(
    field: &BoulderField,
    params: &RobotParams,
    range: &CRange,
    settings: &SimSettings,
    mode: SelectionMode,
) -> Result<Selection> {
    range.validate()?;
    let no_feasible = || Error::NoFeasibleC {
        c_min: range.c_min,
        c_max: range.c_max,
        segment: None,
    };
    match mode {
        SelectionMode::FirstFeasible => {
            let mut report = TraversabilityReport::default();
            for c in range.values() {
                let row = evaluate_connection(field, params, c, settings)?;
                report.rows.push(row);
                if row.is_feasible() {
                    return Ok(Selection { chosen_c: c, report });
                }
            }
            Err(no_feasible())
        }
        SelectionMode::LongestStride => {
            let report = sweep_connection_lengths(field, params, range, settings)?;
            // Ties go to the shorter connection.
            let best = report
                .rows
                .iter()
                .filter(|r| r.is_feasible())
                .fold(None::<&TraversabilityRow>, |best, r| match best {
                    Some(b) if b.displacement_ubl >= r.displacement_ubl => Some(b),
                    _ => Some(r),
                })
                .map(|r| r.connection_c)
                .ok_or_else(no_feasible)?;
            Ok(Selection { chosen_c: best, report })
        }
    }
}

/// One segment's entry in a [`ConnectionSchedule`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub segment_index: usize,
    pub x_start: f64,
    pub x_end: f64,
    pub spacing_x: f64,
    pub spacing_y: f64,
    pub radius: f64,
    pub chosen_c: f64,
    /// Sweep row of the chosen length.
    pub report_excerpt: TraversabilityRow,
}

/// Connection length to use on each terrain segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionSchedule {
    pub entries: Vec<ScheduleEntry>,
}

impl ConnectionSchedule {
    pub fn lengths(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.chosen_c).collect()
    }
}

/// Select a connection length for every segment. Segments with the same
/// lattice share one selection.
pub fn plan_segments(
    segments: &TerrainSegmentList,
    params: &RobotParams,
    range: &CRange,
    settings: &SimSettings,
    mode: SelectionMode,
) -> Result<ConnectionSchedule> {
    range.validate()?;
    let key = |f: &BoulderField| {
        [f.radius(), f.spacing_x(), f.spacing_y()].map(f64::to_bits)
    };
    let mut memo: Vec<([u64; 3], Selection)> = Vec::new();
    let mut entries = Vec::with_capacity(segments.len());
    for (i, seg) in segments.segments().iter().enumerate() {
        // Selection runs on the unbounded lattice the segment is cut from.
        let k = key(&seg.field);
        let selection = match memo.iter().find(|(mk, _)| *mk == k) {
            Some((_, s)) => s.clone(),
            None => {
                let s = select_connection_length(&seg.field, params, range, settings, mode).map_err(
                    |e| match e {
                        Error::NoFeasibleC { c_min, c_max, .. } => Error::NoFeasibleC {
                            c_min,
                            c_max,
                            segment: Some(i),
                        },
                        other => other,
                    },
                )?;
                memo.push((k, s.clone()));
                s
            }
        };
        entries.push(ScheduleEntry {
            segment_index: i,
            x_start: seg.x_start,
            x_end: seg.x_end,
            spacing_x: seg.field.spacing_x(),
            spacing_y: seg.field.spacing_y(),
            radius: seg.field.radius(),
            chosen_c: selection.chosen_c,
            report_excerpt: *selection.chosen_row(),
        });
    }
    Ok(ConnectionSchedule { entries })
}
