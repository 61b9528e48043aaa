//! Configuration, experiment runners and CSV output behind the
//! `kernelflows` binary.

pub mod config;
pub mod experiments;
pub mod output;

pub use config::{ConfigError, ExperimentConfig, ExperimentKind, MeasureSpec};
pub use experiments::{run, verify, Check, Report, RunError};

/// Environment variable that fixes the worker pool size.
pub const THREADS_ENV: &str = "KERNELFLOWS_THREADS";

/// Exit status when every asserted check passes.
pub const EXIT_PASS: u8 = 0;
/// Exit status when a statistical or exactness check fails.
pub const EXIT_CHECK_FAILED: u8 = 1;
/// Exit status for invalid configuration, flags or output paths.
pub const EXIT_CONFIG: u8 = 2;
