//! Configuration, experiment drivers and output files for the `ambo` binary.

pub mod config;
pub mod experiments;
pub mod io;

use thiserror::Error;

use crate::scheme::SchemeError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl HarnessError {
    pub fn invalid(e: impl std::fmt::Display) -> Self {
        HarnessError::Invalid(e.to_string())
    }

    pub fn numerical(e: impl std::fmt::Display) -> Self {
        HarnessError::Numerical(e.to_string())
    }

    pub fn from_scheme(e: SchemeError) -> Self {
        match e {
            SchemeError::VolumeUnrepresentable { .. } | SchemeError::Config(_) => HarnessError::invalid(e),
            _ => HarnessError::numerical(e),
        }
    }

    /// 1 for bad input, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Numerical(_) => 2,
            _ => 1,
        }
    }
}
