//! Crate-level error type.

use thiserror::Error;

use crate::calibrate::CalibrationError;
use crate::evolve::EvolveError;
use crate::experiments::ExperimentError;
use crate::lattice::LatticeError;
use crate::model::ModelError;
use crate::semiclassical::SemiclassicalError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Semiclassical(#[from] SemiclassicalError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics (step budget, fit convergence, ...)
    /// rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Evolve(e) => e.is_numerical(),
            Error::Calibration(e) => e.is_numerical(),
            Error::Experiment(e) => e.is_numerical(),
            Error::Semiclassical(e) => e.is_numerical(),
            _ => false,
        }
    }
}
