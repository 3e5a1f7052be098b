use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("{}: {message}", path.display())]
    Input { path: PathBuf, message: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] ramanlab_core::Error),

    #[error(transparent)]
    MonteCarlo(#[from] ramanlab_mc::MonteCarloError),

    #[error(transparent)]
    Dsh(#[from] ramanlab_dsh::DshError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn io_context<T>(r: std::io::Result<T>, context: impl FnOnce() -> String) -> Result<T> {
    r.map_err(|source| CliError::Io {
        context: context(),
        source,
    })
}
