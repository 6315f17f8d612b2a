//! File formats, parallel orchestration and command implementations around
//! the `bentcable-core` sampler: CSV datasets and draws, JSON configuration
//! and manifests, SVG curve plots and concurrent chains and replicates.

pub mod commands;
pub mod config;
pub mod draws;
pub mod error;
pub mod io;
pub mod manifest;
pub mod parallel;
pub mod svg;

pub use bentcable_core as core;
pub use error::{CliError, Result, EXIT_FAILURE};
