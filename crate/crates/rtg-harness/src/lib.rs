//! Experiment harness for ReLU transition graph studies: declarative
//! experiment configs, seeded sweep execution with CSV/JSON emission, RTG
//! artifact persistence, and oracle verification suites.

pub mod artifact;
pub mod config;
pub mod experiment;
pub mod record;
pub mod verify;

/// Errors surfaced by the harness itself, wrapping core pipeline errors.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config: {message}")]
    Config { message: String },
    #[error(transparent)]
    Core(#[from] rtg_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
