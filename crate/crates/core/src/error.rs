//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Instance or configuration data failed validation. `field` names the
    /// offending input so front ends can report it mechanically.
    #[error("validation failed for `{field}`: {message}")]
    Validation { field: &'static str, message: String },

    /// An argument left the documented domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The shooting solver could not bracket or converge.
    #[error("solver failed: {0}")]
    Solver(String),

    /// A Monte Carlo path or cost evaluation became invalid.
    #[error("simulation error: {0}")]
    Simulation(String),
}

impl Error {
    pub fn validation(field: &'static str, message: impl Into<String>) -> Self {
        Error::Validation { field, message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
