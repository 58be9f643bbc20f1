//! Command-line front end for `pvcopula`.
//!
//! The binary is a thin clap wrapper around this library: [`commands`] holds
//! the single-shot subcommands, [`experiments`] the seeded studies, and
//! [`verify`] the reproducible verification cases.

pub mod battery;
pub mod commands;
pub mod experiments;
pub mod family;
pub mod report;
pub mod verify;

use pvcopula::CopulaError;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

/// Exit code for a failed verification.
pub const EXIT_FAIL: i32 = 1;
/// Exit code for bad arguments or unreadable input.
pub const EXIT_USAGE: i32 = 2;
/// Exit code for numerical or domain errors raised by the library.
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Copula(#[from] CopulaError),
    #[error("unknown verification case '{0}'")]
    UnknownCase(String),
    #[error("unknown mode '{0}'")]
    BadMode(String),
    #[error("{0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Copula(_) => EXIT_NUMERIC,
            _ => EXIT_USAGE,
        }
    }
}

/// The generator behind every seeded command: ChaCha20 seeded from a `u64`.
pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}
