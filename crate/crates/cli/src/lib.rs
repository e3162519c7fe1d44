//! Run orchestration for the `funnel` binary: configuration, single runs,
//! parameter sweeps, artifacts and SVG plots.

// `!(x > 0)` also rejects NaN, which `x <= 0` would let through
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod pipeline;
pub mod svg;
pub mod sweep;

use funnel_core::Error as CoreError;

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("i/o on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("artifact {path}: {detail}")]
    Artifact { path: String, detail: String },
    #[error("verdict undecided")]
    Undecided,
}

impl CliError {
    /// Process exit status: 2 config, 3 geometry, 4 convergence, 5 undecided,
    /// 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Core(CoreError::InvalidParameter(_)) => 2,
            CliError::Core(CoreError::GeometryInfeasible(_)) => 3,
            CliError::Core(CoreError::Convergence { .. } | CoreError::Divergence(_)) => 4,
            CliError::Undecided => 5,
            _ => 1,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
