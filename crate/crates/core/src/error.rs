use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::conformal::ConformalError;
use crate::diagnostics::DiagnosticsError;
use crate::indices::IndicesError;
use crate::io::IngestError;
use crate::map::MapError;
use crate::network::NetworkError;
use crate::sampler::SamplerError;

/// Everything that can go wrong between reading a config and writing outputs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Indices(#[from] IndicesError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Conformal(#[from] ConformalError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("stage {stage}: {source}")]
    Stage { stage: &'static str, source: Box<Error> },
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    pub fn format(path: &Path, message: impl ToString) -> Self {
        Error::Format { path: path.to_path_buf(), message: message.to_string() }
    }
}
