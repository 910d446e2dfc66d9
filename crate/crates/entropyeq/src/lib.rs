//! Command-line driver for `entropyeq-core`: JSON configs in, JSON reports and
//! CSV field tables out.
//!
//! [`run`] is the single entry point; the binary only parses flags and maps
//! the outcome to an exit status.

pub mod config;
pub mod output;
pub mod pipeline;
pub mod report;
pub mod studies;

pub use config::{Command, RunConfig};
pub use pipeline::run;
pub use report::RunReport;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] entropyeq_core::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Exit status for a finished run: 0 when everything converged (and verified,
/// where that applies), 2 when the report carries a failure flag.
pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FLAGGED: i32 = 2;
