use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("singular design: all abscissae are equal")]
    SingularDesign,

    #[error("not enough data: need at least {needed} points, got {got}")]
    NotEnoughData { needed: usize, got: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("root finder failed to converge: {0}")]
    NoConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require(cond: bool, name: &'static str, reason: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: reason.into(),
        })
    }
}
