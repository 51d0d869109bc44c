use thiserror::Error;

use crate::features::ColumnId;
use crate::mondrian::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("lifetime must be finite and non-negative, got {0}")]
    InvalidLifetime(f64),

    #[error("lifetime {requested} exceeds the terminal lifetime {terminal} of the tree")]
    LifetimeBeyondTerminal { requested: f64, terminal: f64 },

    #[error("point lies outside the instantiated region of the tree; extend the tree first")]
    ExtensionRequired,

    #[error("outer box does not contain the root box of the tree")]
    NotContained,

    #[error("leaf {node:?} of tree {tree} has no feature column")]
    UnknownLeaf { tree: usize, node: NodeId },

    #[error("column {0:?} is not a live column of this state")]
    UnknownColumn(ColumnId),

    #[error("feature vectors come from incompatible indexers")]
    IndexerMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("the trace is empty")]
    EmptyTrace,

    #[error("prior assigns mass {0} outside [0, terminal lifetime]")]
    PriorMassOutside(f64),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the error originates from malformed user input rather than
    /// from a numerical breakdown.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Numerical(_))
    }
}
