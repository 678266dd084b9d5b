use std::path::PathBuf;

use crate::model::UnitId;

pub type Result<T, E = CmabError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CmabError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible: action size {k} exceeds unit count {units}")]
    Infeasible { k: usize, units: usize },

    #[error("capacity exceeded: {what} needs {needed} items, cap is {cap}")]
    Capacity {
        what: &'static str,
        needed: u128,
        cap: u128,
    },

    #[error("observation {value} for arm {arm} is outside [0, 1]")]
    Domain { arm: usize, value: f64 },

    #[error("gaussian state is uninitialized: arm {arm} has no observations")]
    Uninitialized { arm: usize },

    #[error("greedy solution under the true means is not unique ({} reachable actions)", .solutions.len())]
    MultipleSolutions { solutions: Vec<Vec<UnitId>> },

    #[error(
        "eps = {eps} too large: gap for unit {unit} at step {step} is {gap}, needs > {threshold}"
    )]
    EpsTooLarge {
        unit: UnitId,
        step: usize,
        gap: f64,
        eps: f64,
        threshold: f64,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl CmabError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CmabError::Io {
            path: path.into(),
            source,
        }
    }
}
