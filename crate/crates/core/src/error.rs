use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient replication: need at least {needed} runs, got {got}")]
    InsufficientReplication { needed: usize, got: usize },

    #[error("degenerate replicates: all outputs are equal")]
    DegenerateReplicates,

    #[error("skewness {0} is outside the skew-normal range (|gamma| < 0.99527)")]
    UnattainableSkewness(f64),

    #[error("excess kurtosis {0} is outside the generalised-normal range (kappa > -1.2)")]
    UnattainableKurtosis(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("model error: {0}")]
    Model(String),

    /// Hyperparameter search did not converge; `best` holds the best
    /// log-scale parameter vector found.
    #[error("fitting failed: {message}")]
    Fit { message: String, best: Vec<f64> },

    #[error("ingestion error at row {row}: {message}")]
    Ingestion { row: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
