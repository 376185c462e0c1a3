//! Library half of the `gaugesim` binary: configuration, experiment runner,
//! artifact writing and plotting. Kept separate from `main.rs` so the
//! acceptance tests can drive it in-process.

pub mod config;
pub mod plot;
pub mod runner;

use thiserror::Error;

pub use config::RunConfig;
pub use runner::{run, Artifact, RunOptions, RunOutput};

/// Process exit status for each failure class.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INVALID_CONFIG: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const IO: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => exit::INVALID_CONFIG,
            CliError::Numerical(_) => exit::NUMERICAL,
            CliError::Io(_) => exit::IO,
        }
    }
}

impl From<gaugesim::Error> for CliError {
    fn from(e: gaugesim::Error) -> Self {
        match e {
            gaugesim::Error::Io(e) => CliError::Io(e.to_string()),
            e if e.is_numerical() => CliError::Numerical(e.to_string()),
            // Everything else stems from inputs the configuration supplied.
            e => CliError::Invalid(e.to_string()),
        }
    }
}

macro_rules! via_core {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                gaugesim::Error::from(e).into()
            }
        })*
    };
}

via_core!(
    gaugesim::lattice::LatticeError,
    gaugesim::model::ModelError,
    gaugesim::evolve::EvolveError,
    gaugesim::calibrate::CalibrationError,
    gaugesim::experiments::ExperimentError,
    gaugesim::semiclassical::SemiclassicalError
);

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
