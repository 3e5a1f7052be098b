use thiserror::Error;

#[derive(Debug, Error)]
pub enum DshError {
    #[error("invalid DSH configuration: {0}")]
    Config(String),

    #[error("invalid spectrum: {0}")]
    Spectrum(String),

    #[error(transparent)]
    Core(#[from] ramanlab_core::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DshError>;
