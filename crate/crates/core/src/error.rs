use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("visibility is indeterminate (omega = 0 and sigma_opt * sigma_spin = 0)")]
    Indeterminate,

    #[error("invalid profile width: {0}")]
    InvalidWidth(String),

    #[error("tabulated profile shifts are not uniformly spaced (row {row})")]
    NonUniformGrid { row: usize },

    #[error("profile has no positive density")]
    AllZero,

    #[error("negative density {value} at shift {shift}")]
    NegativeDensity { shift: f64, value: f64 },

    #[error("quadrature did not converge at {flagged} of {total} grid points")]
    QuadratureNotConverged { flagged: usize, total: usize },

    #[error("dip not resolved: depth {depth:.3e} below threshold {threshold:.3e}")]
    NotResolved { depth: f64, threshold: f64 },

    #[error("curve has no interior dip")]
    NoDip,

    #[error("window contains no grid points")]
    EmptyWindow,

    #[error("grid too coarse: {points:.1} points across the dip, need at least {required}")]
    GridTooCoarse { points: f64, required: usize },

    #[error("least-squares fit diverged: {0}")]
    FitDiverged(String),

    #[error("invalid optical depth {0}")]
    InvalidDepth(f64),

    #[error("traces do not share a grid and optical depth")]
    GridMismatch,

    #[error("uncoupled trace shows no absorption (peak transmission {0})")]
    DegenerateBaseline(f64),

    #[error("trace shows no absorption feature")]
    FeatureAbsent,

    #[error("another frequency class at offset {offset} is resonant with all three fields")]
    AmbiguousSelection { offset: f64 },

    #[error("pumping has no dark ground state for {} class(es), first at offset {}", .offsets.len(), .offsets.first().copied().unwrap_or(f64::NAN))]
    NoConvergence { offsets: Vec<f64> },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("CSV schema error: {0}")]
    Schema(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParams(msg.into())
    }

    pub(crate) fn validation(field: &str, msg: impl Into<String>) -> Self {
        Error::Validation {
            field: field.to_string(),
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wrap with the pipeline stage that produced the error.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code: 2 validation, 3 numeric failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Io { .. } => 4,
            Error::Parse { .. }
            | Error::Validation { .. }
            | Error::Schema(_)
            | Error::InvalidParams(_)
            | Error::InvalidWidth(_)
            | Error::NonUniformGrid { .. }
            | Error::NegativeDensity { .. }
            | Error::InvalidDepth(_)
            | Error::GridMismatch
            | Error::Indeterminate
            | Error::AmbiguousSelection { .. } => 2,
            _ => 3,
        }
    }
}
