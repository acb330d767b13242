use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parameter `{name}` = {value} is out of range: {reason}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("baseline interest rate must be positive (month {month} has {value})")]
    NonPositiveRate { month: usize, value: f64 },
    #[error("mortgage rate must be positive (month {month} has {value})")]
    NonPositiveMortgageRate { month: usize, value: f64 },
    #[error("series `{series}` has {len} months but the horizon is {horizon}")]
    SeriesTooShort {
        series: &'static str,
        len: usize,
        horizon: usize,
    },
    #[error("population target covers {got} municipalities, city has {expected}")]
    SeriesShape { got: usize, expected: usize },
    #[error("unknown parameter `{name}`; valid names: {valid}")]
    UnknownParameter { name: String, valid: String },
    #[error("invalid sweep spec `{spec}`: {reason}")]
    BadSweep { spec: String, reason: String },
    #[error("invalid city specification: {0}")]
    City(String),
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("exogenous series exhausted at month {month} (horizon {len})")]
    HorizonExhausted { month: u32, len: usize },
    #[error("ledger conservation violated in phase `{phase}`: drift {drift} minor units")]
    Conservation { phase: &'static str, drift: i128 },
    #[error("ledger structure mismatch: {0}")]
    Structural(String),
    #[error("generation failed: {0}")]
    Generation(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("snapshot error: {0}")]
    Snapshot(String),
}

impl SimError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the model's accounting invariants.
    pub fn is_integrity(&self) -> bool {
        matches!(
            self,
            SimError::Conservation { .. } | SimError::Structural(_)
        )
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
