use std::path::PathBuf;

use thiserror::Error;

use crate::lp::LpStatus;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("grand coalition loses (total weight {total} < quota {quota}); solution concepts need v(N) = 1")]
    LosingGrandCoalition { total: f64, quota: f64 },

    #[error("{n} players exceeds the enumeration limit of {cap}")]
    EnumerationLimit { n: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("degenerate game: {0}")]
    DegenerateGame(String),

    #[error("linear program ended with status {status:?}: {detail}")]
    Lp { status: LpStatus, detail: String },

    #[error("game generation failed: {0}")]
    Generation(String),

    #[error("training diverged at epoch {epoch}: {detail}")]
    Training { epoch: usize, detail: String },

    #[error("model holds {capacity} player slots but the game has {n} players")]
    Capacity { n: usize, capacity: usize },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown test distribution `{0}`")]
    UnknownDistribution(String),

    #[error("{path}:{line}: {detail}")]
    Parse {
        path: PathBuf,
        line: u64,
        detail: String,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("missing timings: {0}")]
    MissingTimings(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by solver limits or numerical failure rather than bad input or I/O.
    pub fn is_solver_error(&self) -> bool {
        matches!(
            self,
            Error::EnumerationLimit { .. }
                | Error::Lp { .. }
                | Error::Training { .. }
                | Error::Numerical(_)
                | Error::DegenerateGame(_)
                | Error::Generation(_)
                | Error::Capacity { .. }
        )
    }

    pub fn is_io_error(&self) -> bool {
        matches!(
            self,
            Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::Parse { .. }
        )
    }
}
