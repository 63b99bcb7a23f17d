use thiserror::Error;

use crate::mle::Fit;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sample needs at least two distinct points, got {0}")]
    DegenerateSample(usize),
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("abscissae must be strictly increasing (position {0})")]
    NotIncreasing(usize),
    #[error("invalid weights: {0}")]
    BadWeights(String),
    #[error("knots and values differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("slopes increase at knot {index} (excess {excess:.3e})")]
    NotConcave { index: usize, excess: f64 },
    #[error("point {0} lies outside [{1}, {2}]")]
    OutOfDomain(f64, f64, f64),
    #[error("function domain [{got_lo}, {got_hi}] does not match expected [{want_lo}, {want_hi}]")]
    DomainMismatch {
        got_lo: f64,
        got_hi: f64,
        want_lo: f64,
        want_hi: f64,
    },
    #[error("mode constraint violated at {m}: left slope {left:.3e}, right slope {right:.3e}")]
    ModeInfeasible { m: f64, left: f64, right: f64 },
    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        best: Box<Fit>,
    },
    #[error("exhaustive search supports at most 8 grid points, got {0}")]
    TooLarge(usize),
    #[error("exhaustive search is inconsistent: {0}")]
    Inconsistent(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{skipped} of {total} replications failed to converge")]
    TooManyFailures { skipped: usize, total: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
