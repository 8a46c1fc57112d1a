//! Command-line front end and the CSV/JSON emitters behind it.
//!
//! All numbers are written with 17 significant digits in scientific
//! notation, so files round-trip exactly and are byte-identical across runs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{ConnectionChoice, ExperimentConfig};
use crate::energy::{landscape_1d, EnergyLandscape1D};
use crate::error::Error;
use crate::planner::{
    plan_segments, sweep_connection_lengths, ConnectionSchedule, SelectionMode,
    TraversabilityReport,
};
use crate::quasistatic::{find_jamming_states, rollout, ConnectionPolicy, JammingState, Trajectory};
use crate::robot::{GaitGroup, PlanarState};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "BOULDER_TRAVERSE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "boulder-traverse", version, about = "Energy-landscape traversability model for connected robot pairs on boulder fields")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Energy along the heading through a reference state.
    Landscape(LandscapeArgs),
    /// Classify every connection length of a range.
    Sweep(SweepArgs),
    /// Choose a connection length per terrain segment (JSON schedule).
    Plan(PlanArgs),
    /// Simulate strides across the configured terrain.
    Rollout(RolloutArgs),
    /// List the jamming states of the configured pair.
    Jamming(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RangeArgs {
    /// Smallest connection length (m), overrides `sweep.c_min`
    #[arg(long, allow_negative_numbers = true)]
    pub c_min: Option<f64>,
    /// Largest connection length (m), overrides `sweep.c_max`
    #[arg(long, allow_negative_numbers = true)]
    pub c_max: Option<f64>,
    /// Connection length step (m), overrides `sweep.c_step`
    #[arg(long, allow_negative_numbers = true)]
    pub c_step: Option<f64>,
}

#[derive(Debug, Args)]
pub struct LandscapeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Offsets along the heading (m), overrides `landscape.phi_min/phi_max`
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    pub phi_range: Option<Vec<f64>>,
    /// Sample spacing (m), overrides `landscape.phi_step`
    #[arg(long, value_name = "S", allow_negative_numbers = true)]
    pub phi_step: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub range: RangeArgs,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub range: RangeArgs,
    /// Pick the feasible length with the longest stride instead of the
    /// first feasible one (an extension beyond the first-feasible loop).
    #[arg(long)]
    pub best: bool,
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of strides, overrides `rollout.strides`
    #[arg(long, value_name = "N")]
    pub strides: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{THREADS_ENV}: {0}")]
    Threads(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(e) => e.exit_code(),
            CliError::Io { .. } => 1,
            CliError::Threads(_) => 2,
        }
    }
}

/// Parse the worker cap from the environment value, if any.
pub fn thread_cap(value: Option<&str>) -> Result<Option<usize>, CliError> {
    let Some(v) = value else { return Ok(None) };
    match v.trim().parse::<usize>() {
        Ok(n) if n >= 1 => Ok(Some(n)),
        _ => Err(CliError::Threads(format!("expected a positive integer, got {v:?}"))),
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Landscape(a) => {
            let mut cfg = load(&a.common.config)?;
            if let Some(r) = a.phi_range {
                cfg.landscape.phi_min = r[0];
                cfg.landscape.phi_max = r[1];
            }
            if let Some(s) = a.phi_step {
                cfg.landscape.phi_step = s;
            }
            cfg.validate()?;
            write_output(a.common.out.as_deref(), &landscape_csv(&cmd_landscape(&cfg)?))
        }
        Command::Sweep(a) => {
            let mut cfg = load(&a.common.config)?;
            apply_range(&mut cfg, &a.range)?;
            write_output(a.common.out.as_deref(), &sweep_csv(&cmd_sweep(&cfg)?))
        }
        Command::Plan(a) => {
            let mut cfg = load(&a.common.config)?;
            apply_range(&mut cfg, &a.range)?;
            if a.best {
                cfg.sweep.mode = SelectionMode::LongestStride;
            }
            write_output(a.common.out.as_deref(), &schedule_json(&cmd_plan(&cfg)?))
        }
        Command::Rollout(a) => {
            let mut cfg = load(&a.common.config)?;
            if let Some(n) = a.strides {
                cfg.rollout.strides = n;
            }
            cfg.validate()?;
            write_output(a.common.out.as_deref(), &rollout_csv(&cmd_rollout(&cfg)?))
        }
        Command::Jamming(c) => {
            let cfg = load(&c.config)?;
            write_output(c.out.as_deref(), &jamming_csv(&cmd_jamming(&cfg)?))
        }
    }
}

fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    Ok(ExperimentConfig::load(path)?)
}

fn apply_range(cfg: &mut ExperimentConfig, r: &RangeArgs) -> Result<(), CliError> {
    if let Some(v) = r.c_min {
        cfg.sweep.c_min = v;
    }
    if let Some(v) = r.c_max {
        cfg.sweep.c_max = v;
    }
    if let Some(v) = r.c_step {
        cfg.sweep.c_step = v;
    }
    cfg.validate()?;
    Ok(())
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|source| CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

pub fn cmd_landscape(cfg: &ExperimentConfig) -> Result<EnergyLandscape1D, Error> {
    let config = cfg.pair_config()?;
    let field = cfg.field()?;
    let stance: GaitGroup = cfg.landscape.stance.into();
    let reference = match cfg.landscape.reference {
        Some([x, y, t]) => PlanarState::new(x, y, t),
        None => {
            find_jamming_states(&config, &field, stance, cfg.settings.theta_window, &cfg.settings)?[0]
                .state()
        }
    };
    let l = &cfg.landscape;
    landscape_1d(&config, &field, &reference, stance, (l.phi_min, l.phi_max), l.phi_step)
}

pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<TraversabilityReport, Error> {
    sweep_connection_lengths(&cfg.field()?, &cfg.robot, &cfg.sweep.range(), &cfg.settings)
}

pub fn cmd_plan(cfg: &ExperimentConfig) -> Result<ConnectionSchedule, Error> {
    plan_segments(&cfg.segments()?, &cfg.robot, &cfg.sweep.range(), &cfg.settings, cfg.sweep.mode)
}

pub fn cmd_rollout(cfg: &ExperimentConfig) -> Result<Trajectory, Error> {
    let segments = cfg.segments()?;
    let policy = match cfg.rollout.connection {
        ConnectionChoice::Fixed => ConnectionPolicy::Fixed(cfg.pair.connection_c),
        ConnectionChoice::Schedule => {
            ConnectionPolicy::PerSegment(cfg.rollout.schedule.clone().unwrap_or_default())
        }
        ConnectionChoice::Planned => ConnectionPolicy::PerSegment(cmd_plan(cfg)?.lengths()),
    };
    rollout(&cfg.robot, &segments, &policy, &cfg.start_state(), cfg.rollout.strides, &cfg.settings)
}

pub fn cmd_jamming(cfg: &ExperimentConfig) -> Result<Vec<JammingState>, Error> {
    let config = cfg.pair_config()?;
    find_jamming_states(&config, &cfg.field()?, GaitGroup::Group1, cfg.settings.theta_window, &cfg.settings)
}

/// 17 significant digits, scientific notation, no negative zero.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return format!("{:.16e}", 0.0);
    }
    format!("{x:.16e}")
}

pub fn landscape_csv(l: &EnergyLandscape1D) -> String {
    let mut s = String::from("phi_m,energy_j,alpha_rad\n");
    for i in 0..l.len() {
        let _ = writeln!(
            s,
            "{},{},{}",
            fmt_num(l.phi_samples[i]),
            fmt_num(l.e_values[i]),
            fmt_num(l.alpha_values[i])
        );
    }
    s
}

pub fn sweep_csv(r: &TraversabilityReport) -> String {
    let mut s =
        String::from("connection_c_m,connection_c_ubl,dot_v1v2,displacement_ubl,classification,jamming_count\n");
    for row in &r.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            fmt_num(row.connection_c),
            fmt_num(row.connection_c_ubl),
            fmt_num(row.dot_v1v2),
            fmt_num(row.displacement_ubl),
            row.classification.label(),
            row.jamming_count
        );
    }
    s
}

pub fn rollout_csv(t: &Trajectory) -> String {
    let mut s = String::from("stride,x_m,y_m,theta_rad,z_m,alpha_rad,stance,event\n");
    for e in &t.entries {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            e.stride_index,
            fmt_num(e.state.x),
            fmt_num(e.state.y),
            fmt_num(e.state.theta),
            fmt_num(e.z),
            fmt_num(e.alpha),
            e.stance.label(),
            e.event.label()
        );
    }
    s
}

pub fn jamming_csv(states: &[JammingState]) -> String {
    let mut s = String::from(
        "x_m,y_m,theta_rad,z_m,alpha_rad,phi_offset_m,dot_v1v2,displacement_m,classification,max_edge_distance_m\n",
    );
    for j in states {
        let p = &j.pose;
        let max_edge = j.edge_distances.iter().map(|e| e.1).fold(0.0, f64::max);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_num(p.state.x),
            fmt_num(p.state.y),
            fmt_num(p.state.theta),
            fmt_num(p.z),
            fmt_num(p.alpha),
            fmt_num(j.phi_offset),
            fmt_num(j.outcome.dot_v1v2),
            fmt_num(j.outcome.displacement.norm()),
            j.outcome.classification.label(),
            fmt_num(max_edge)
        );
    }
    s
}

pub fn schedule_json(s: &ConnectionSchedule) -> String {
    let mut out = serde_json::to_string_pretty(s).expect("schedule serializes");
    out.push('\n');
    out
}
