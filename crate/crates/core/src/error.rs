use thiserror::Error;

use crate::ufm::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("column {index} has norm {norm:e}, frames need nonzero columns")]
    ZeroColumn { index: usize, norm: f64 },

    /// Gradient descent produced a non-finite iterate. Carries the trajectory
    /// recorded up to the last finite iterate.
    #[error("gradient descent diverged at iteration {iter}")]
    Divergence {
        iter: usize,
        trajectory: Box<Trajectory>,
    },

    #[error("invalid input document: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
