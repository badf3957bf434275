use thiserror::Error;

pub type Result<T> = std::result::Result<T, CorankError>;

#[derive(Debug, Error)]
pub enum CorankError {
    /// Grid or factorization parameters that violate their constraints.
    #[error("invalid grid specification: {0}")]
    InvalidSpec(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid score function: {0}")]
    InvalidScore(String),

    /// Covariate matrix whose centered cross-product is (numerically) singular.
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A replication of a simulation study failed; `seed` identifies its stream.
    #[error("replication {replication} (master seed {seed}) failed: {source}")]
    Replication {
        replication: usize,
        seed: u64,
        #[source]
        source: Box<CorankError>,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CorankError {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            CorankError::InvalidSpec(_) => 1,
            CorankError::InvalidInput(_)
            | CorankError::Data(_)
            | CorankError::Io(_)
            | CorankError::Csv(_)
            | CorankError::Json(_) => 2,
            CorankError::InvalidScore(_)
            | CorankError::DegenerateDesign(_)
            | CorankError::DegenerateInput(_)
            | CorankError::Numerical(_) => 3,
            CorankError::Replication { source, .. } => source.exit_code(),
        }
    }
}
