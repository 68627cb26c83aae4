//! Command-line front end for `vortex-core`.
//!
//! Scenarios are JSON files (see [`config::ScenarioConfig`]); bulk numeric
//! output is CSV and summaries are JSON. Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | invalid configuration or arguments |
//! | 2 | integration failure (near-collision) |
//! | 3 | `period`: no return within `t_max` |
//! | 4 | `verify`: at least one check failed |

use std::fmt;
use std::path::Path;

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_INTEGRATION: i32 = 2;
pub const EXIT_NO_PERIOD: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

/// Error carrying its process exit code.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(e: impl fmt::Display) -> Self {
        Self { code: EXIT_CONFIG, message: e.to_string() }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self { code: EXIT_CONFIG, message: format!("cannot write {}: {e}", path.display()) }
    }
}

impl From<vortex_core::Error> for CliError {
    fn from(e: vortex_core::Error) -> Self {
        let code = match e {
            vortex_core::Error::Integration(_) => EXIT_INTEGRATION,
            _ => EXIT_CONFIG,
        };
        Self { code, message: e.to_string() }
    }
}
