//! Standard-library companion of `cohere-core`: sweep and feature-map file
//! formats, TOML configuration, SVG diagnostics and the commands behind the
//! `cohere` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod plots;

pub use config::PipelineConfig;
pub use error::{Error, Result};
