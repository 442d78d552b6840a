//! Drivers for the wall-model toolkit: reference-profile ingestion, a priori
//! runs, the coupled stepping loop, cost benchmarks and the `wmkit` CLI.

pub mod apriori;
pub mod bench;
pub mod cli;
pub mod config;
pub mod coupled;
pub mod gradtest;
pub mod profile;

use thiserror::Error;
use wallmodel_core::eqwm::EqwmError;
use wallmodel_core::iwm::IwmError;
use wallmodel_core::surface::SurfaceError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("data error: {0}")]
    Data(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("step {step}, stage {stage}: {message}")]
    Stage {
        stage: &'static str,
        step: usize,
        message: String,
    },
}

impl From<EqwmError> for HarnessError {
    fn from(e: EqwmError) -> Self {
        HarnessError::Model(e.to_string())
    }
}

impl From<IwmError> for HarnessError {
    fn from(e: IwmError) -> Self {
        HarnessError::Model(e.to_string())
    }
}

impl From<SurfaceError> for HarnessError {
    fn from(e: SurfaceError) -> Self {
        match e {
            SurfaceError::Config(m) => HarnessError::Config(m),
            other => HarnessError::Model(other.to_string()),
        }
    }
}
