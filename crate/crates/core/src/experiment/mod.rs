//! Declarative experiment configs and their runner. A config names one
//! experiment kind and carries a section with its parameters; running it
//! produces CSV tables and a JSON manifest entirely in memory before
//! anything touches the disk.

mod config;
mod run;

pub use config::{
    AncillaSection, BufferedSection, CorrelatorSection, DistillSection, ExperimentConfig, ExperimentKind, Fig2Section,
    IdentitySection, ScalingSection, SystemSection, VirtualDensitySection, MAX_STATE_DIM,
};
pub use run::{config_hash, run_experiment, ExperimentOutput, OutputFile};

use thiserror::Error;

use crate::correlator::CorrelatorError;
use crate::fock::FockError;
use crate::model::ModelError;
use crate::protocol::ProtocolError;
use crate::quench::QuenchError;
use crate::replica::ReplicaError;
use crate::thermal::ThermalError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("infeasible: {what} has dimension {dim}, limit {limit}")]
    Infeasible { what: String, dim: u64, limit: u64 },
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Thermal(#[from] ThermalError),
    #[error(transparent)]
    Replica(#[from] ReplicaError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Correlator(#[from] CorrelatorError),
    #[error(transparent)]
    Quench(#[from] QuenchError),
    #[error("output: {0}")]
    Output(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for ExperimentError {
    fn from(e: csv::Error) -> Self {
        Self::Output(e.to_string())
    }
}

impl From<serde_json::Error> for ExperimentError {
    fn from(e: serde_json::Error) -> Self {
        Self::Output(e.to_string())
    }
}
