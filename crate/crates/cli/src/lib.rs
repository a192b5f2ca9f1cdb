//! Experiment harness: declarative configs in, CSV result tables out.
//!
//! Subcommands map one-to-one onto the report modules; every run is a pure
//! function of its resolved configuration, so repeating a command yields
//! byte-identical files.

use thiserror::Error;

pub mod common;
pub mod config;
pub mod inspect;
pub mod oracle_gen;
pub mod reports;
pub mod scenario;

pub use config::{ExperimentConfig, Profile, Scheme};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Channel(#[from] ristrack_core::channel::ChannelError),
    #[error(transparent)]
    Link(#[from] ristrack_core::ris_link::LinkError),
    #[error(transparent)]
    Reservoir(#[from] ristrack_core::reservoir::ReservoirError),
    #[error(transparent)]
    Ensemble(#[from] ristrack_core::ensemble::EnsembleError),
    #[error(transparent)]
    Metrics(#[from] ristrack_core::metrics::MetricsError),
    #[error(transparent)]
    Data(#[from] ristrack_core::dataio::DataError),
}
