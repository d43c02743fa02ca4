use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::sim::EpisodeStatus;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("angle is not finite: {0}")]
    NonFiniteAngle(f64),
    #[error("grid resolution must be positive, got {0}")]
    BadResolution(f64),
    #[error("grid must have at least one cell")]
    EmptyGrid,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("start ({0:.2}, {1:.2}) is inside an obstacle or its inflation")]
    StartBlocked(f64, f64),
    #[error("goal ({0:.2}, {1:.2}) is inside an obstacle or its inflation")]
    GoalBlocked(f64, f64),
    #[error("goal is unreachable from start")]
    Unreachable,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("unknown scenario `{0}`")]
    Unknown(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("cannot step a finished episode (status: {0:?})")]
    Terminal(EpisodeStatus),
    #[error("time step must be positive, got {0}")]
    BadTimeStep(f64),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

#[derive(Debug, Error)]
pub enum DrlError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("corrupt checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint io: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// Crate-level error used by the harness and CLI-facing entry points.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Drl(#[from] DrlError),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
