use std::path::PathBuf;

use dp_stts::dp::DpError;
use dp_stts::grid::GridError;
use dp_stts::ingest::IngestError;
use dp_stts::metrics::MetricsError;
use dp_stts::model::{ModelError, ModelFileError};
use dp_stts::synth::SynthError;
use thiserror::Error;

/// Process exit codes, one per error class.
pub mod exit {
    pub const OK: i32 = 0;
    /// Bad flag value or flag combination (clap also uses 2).
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const INGEST: i32 = 4;
    pub const DOMAIN: i32 = 5;
    pub const BUDGET: i32 = 6;
    pub const MODEL: i32 = 7;
    pub const CORRUPT_MODEL: i32 = 8;
    pub const SYNTH: i32 = 9;
    pub const METRICS: i32 = 10;
    pub const CONFIG: i32 = 11;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Ingest { path: PathBuf, source: IngestError },
    #[error("domain/grid: {0}")]
    Domain(#[from] GridError),
    #[error("privacy budget: {0}")]
    Budget(#[from] DpError),
    #[error("model: {0}")]
    Model(ModelError),
    #[error("{path}: {source}")]
    ModelFile {
        path: PathBuf,
        source: ModelFileError,
    },
    #[error("synthesis: {0}")]
    Synth(#[from] SynthError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
    #[error("config {path}: {msg}")]
    Config { path: PathBuf, msg: String },
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Dp(d) => CliError::Budget(d),
            other => CliError::Model(other),
        }
    }
}

impl From<crate::spec::SpecError> for CliError {
    fn from(e: crate::spec::SpecError) -> Self {
        CliError::Usage(e.0)
    }
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Io { .. } => exit::IO,
            CliError::Ingest {
                source: IngestError::Io(_),
                ..
            } => exit::IO,
            CliError::Ingest { .. } => exit::INGEST,
            CliError::Domain(_) => exit::DOMAIN,
            CliError::Budget(_) => exit::BUDGET,
            CliError::Model(_) => exit::MODEL,
            CliError::ModelFile {
                source: ModelFileError::Io(_),
                ..
            } => exit::IO,
            CliError::ModelFile { .. } => exit::CORRUPT_MODEL,
            CliError::Synth(_) => exit::SYNTH,
            CliError::Metrics(_) => exit::METRICS,
            CliError::Config { .. } => exit::CONFIG,
        }
    }
}
