//! Experiment driver: run configuration, convergence studies, acceptance
//! checks and persisted outputs.

pub mod acceptance;
pub mod cli;
pub mod config;
pub mod io;
pub mod studies;

use std::path::PathBuf;

use thiserror::Error;

use crate::det_solver::DetError;
use crate::grid::GridError;
use crate::kinetic::KineticError;
use crate::model::ModelError;
use crate::sde_solver::SdeError;
use crate::splitting::SplitError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Kinetic(#[from] KineticError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Det(#[from] DetError),
    #[error(transparent)]
    Sde(#[from] SdeError),
    #[error(transparent)]
    Grid(#[from] GridError),
}
