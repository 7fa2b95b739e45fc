use std::io;
use std::path::{Path, PathBuf};

use cohere_core::bev::BevError;
use cohere_core::geom::GeomError;
use cohere_core::learn::LearnError;
use cohere_core::pipeline::PipelineError;
use cohere_core::synth::SynthError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: byte {offset}: {message}")]
    Parse { path: PathBuf, offset: usize, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no frames found in {0}")]
    NoFrames(PathBuf),
    #[error("frame-range mismatch: {0}")]
    FrameRange(String),
    #[error("{0}")]
    Check(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Bev(#[from] BevError),
    #[error("thread pool: {0}")]
    Threads(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: &Path) -> impl FnOnce(io::Error) -> Self + '_ {
        move |source| Self::Io { path: path.to_path_buf(), source }
    }

    pub fn parse(path: &Path, offset: usize, message: impl Into<String>) -> Self {
        Self::Parse { path: path.to_path_buf(), offset, message: message.into() }
    }
}
