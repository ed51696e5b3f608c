//! Library side of the `casimir` command: configuration, execution and
//! output formatting, kept separate from argument handling so tests can drive
//! it directly.

pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_config, Command, Format, RunConfig};
pub use run::{execute, Outcome};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Failure {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("convergence failure: {0}")]
    Convergence(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Convergence(_) => 3,
            Failure::Internal(_) => 4,
        }
    }
}

impl From<casimir_core::error::Error> for Failure {
    fn from(e: casimir_core::error::Error) -> Self {
        use casimir_core::error::Error as E;
        match e {
            E::Domain(_) | E::Argument(_) | E::Fit(_) => Failure::Config(e.to_string()),
            E::Convergence { .. } => Failure::Convergence(e.to_string()),
            _ => Failure::Internal(e.to_string()),
        }
    }
}
