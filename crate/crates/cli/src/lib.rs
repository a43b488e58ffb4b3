//! Command-line pipeline: config handling, stage orchestration and
//! artifact bookkeeping on top of `signweave-core`.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod extractors;
pub mod fixture;
pub mod stages;

pub use config::RunConfig;
pub use error::{CliError, ErrorKind, Result};
pub use stages::{Outcome, Pipeline, Stage};
