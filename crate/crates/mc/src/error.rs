use thiserror::Error;

#[derive(Debug, Error)]
pub enum MonteCarloError {
    #[error("invalid Monte Carlo configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] ramanlab_core::Error),

    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MonteCarloError>;
