//! File formats, run configuration and pipeline stages for the
//! `commonality` command-line tool, built on `commonality-core`.

pub mod config;
pub mod error;
pub mod fixtures;
pub mod formats;
pub mod pipeline;

pub use config::RunConfig;
pub use error::{CliError, ErrorKind};
pub use pipeline::{OutputLock, Run};
