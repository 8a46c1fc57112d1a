use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid range: {0}")]
    InvalidRange(String),

    #[error("surface gradient unbounded at ({x}, {y}): {distance} m from a footprint edge")]
    FootprintBoundary { x: f64, y: f64, distance: f64 },

    #[error("state ({x}, {y}) lies outside the supported terrain")]
    NoSupport { x: f64, y: f64 },

    #[error("relaxation did not converge within {iterations} iterations")]
    MaxIterations { iterations: usize },

    #[error("no jamming state found")]
    EmptyResult,

    #[error("no feasible connection length in [{c_min}, {c_max}]{}", segment.map(|s| format!(" for segment {s}")).unwrap_or_default())]
    NoFeasibleC {
        c_min: f64,
        c_max: f64,
        segment: Option<usize>,
    },
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::InvalidRange(_) => 2,
            Error::EmptyResult | Error::NoFeasibleC { .. } => 3,
            Error::MaxIterations { .. } => 4,
            Error::FootprintBoundary { .. } | Error::NoSupport { .. } => 4,
        }
    }
}
