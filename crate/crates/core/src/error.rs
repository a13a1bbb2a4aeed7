use thiserror::Error;

use crate::expr::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("{what} is not finite at z = {z}")]
    Evaluation { what: &'static str, z: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature on [{a}, {b}] did not reach tolerance after {intervals} intervals")]
    QuadratureNotConverged { a: f64, b: f64, intervals: usize },

    #[error("diffusion coefficient is not positive at y = {y}")]
    NonPositiveSigma { y: f64 },

    #[error("transformed coordinate is not monotone near y = {y}")]
    NonMonotoneTransform { y: f64 },

    #[error("drift is not the Ornstein-Uhlenbeck drift a(z) = -z (a({z}) = {value})")]
    NotOrnsteinUhlenbeck { z: f64, value: f64 },

    #[error(
        "eigenvalue moved by {shift:e} between mesh {mesh} and {}; use a finer mesh",
        2 * mesh
    )]
    MeshTooCoarse { mesh: usize, shift: f64 },

    #[error("Liouville potential {potential} differs from gamma {gamma} at z = {z}")]
    LiouvilleMismatch { z: f64, potential: f64, gamma: f64 },

    #[error("need at least {required} uncensored crossing times, found {found}")]
    TooFewSamples { required: usize, found: usize },

    #[error("ensemble dump: {0}")]
    Dump(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
