use thiserror::Error;

/// Errors raised by the smile machinery.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("price {price} outside the no-arbitrage interval ({lower}, {upper})")]
    PriceOutOfBounds { price: f64, lower: f64, upper: f64 },

    #[error("no convergence: {0}")]
    Convergence(String),

    #[error("membership check failed: {0}")]
    Membership(String),

    #[error("no real solution: {0}")]
    NoSolution(String),

    #[error("selected volatility root is not positive: {0}")]
    NonPositiveVol(f64),

    #[error("invalid parameters: {0}")]
    Validation(String),

    #[error("quadrature failure: {0}")]
    Quadrature(String),

    #[error("bad input data: {0}")]
    Data(String),

    #[error("constraint violated: {0}")]
    ConstraintViolation(String),

    #[error("optimization failure: {0}")]
    OptimizationFailure(String),

    #[error("singular expansion: 2 - a0*a1 = {0}")]
    SingularExpansion(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
