use thiserror::Error;

use crate::expr::ExprError;
use crate::ode::OdeError;

/// Broad failure classes, used by the command line to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// A compatibility condition or residual gate failed.
    Validation,
    /// The request itself is malformed.
    Config,
    /// The numerics broke down.
    Numerical,
}

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unsupported parameter branch: {0}")]
    Unsupported(String),
    #[error("{what} vanishes near x = {x}")]
    ZeroCrossing { what: String, x: f64 },
    #[error("phi vanishes at the anchor point x = {x}")]
    PoleAtAnchor { x: f64 },
    #[error("solution is entirely singular: every grid point is masked")]
    EntirelySingular,
    #[error("too many singular points: {fraction:.3} of the grid is masked")]
    MostlySingular { fraction: f64 },
    #[error("{what} violated: sup norm {norm:e} exceeds {tol:e}")]
    Validation { what: String, norm: f64, tol: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("unknown catalog entry `{0}`")]
    UnknownEntry(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidInput(_)
            | Error::UnknownEntry(_)
            | Error::Unsupported(_)
            | Error::PoleAtAnchor { .. } => ErrorClass::Config,
            Error::Validation { .. } | Error::ZeroCrossing { .. } => ErrorClass::Validation,
            Error::Expr(ExprError::Syntax { .. })
            | Error::Expr(ExprError::UnknownIdentifier { .. })
            | Error::Expr(ExprError::EmptyInput)
            | Error::Expr(ExprError::UnboundParameter(_)) => ErrorClass::Config,
            _ => ErrorClass::Numerical,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
