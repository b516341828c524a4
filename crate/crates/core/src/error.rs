use thiserror::Error;

use crate::ode::OdeError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("outside the domain of {operation}: {reason}")]
    Domain {
        operation: &'static str,
        reason: String,
    },
    #[error("certificate did not stabilize up to horizon {horizon} (last change {change:e}); kernel tail does not decay")]
    SeedHorizon { horizon: f64, change: f64 },
    #[error("stable solution has Y(0) = {y0} <= 0 at s = {s}, r = {r}, eps = {eps}")]
    NonPositiveY0 { y0: f64, s: f64, r: f64, eps: f64 },
    #[error("no sign change on [{r_lo}, {r_hi}]: f = ({f_lo:e}, {f_hi:e})")]
    Bracket {
        r_lo: f64,
        r_hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
    #[error("root finding stalled at r = {r} with residual {residual:e}")]
    RootStalled { r: f64, residual: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
