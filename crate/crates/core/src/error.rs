use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("argument {value} outside the domain of {function}")]
    Domain { function: &'static str, value: f64 },

    #[error("{function}({order}, {value}) is outside the representable range")]
    Range {
        function: &'static str,
        order: i64,
        value: f64,
    },

    #[error("invalid quadrature request: {0}")]
    Quadrature(String),

    #[error("invalid media configuration: {0}")]
    Media(String),

    #[error("coincident source and target points")]
    Coincident,

    #[error("point ({x}, {y}) must lie strictly above the interface y = 0")]
    BelowInterface { x: f64, y: f64 },

    #[error("spectral system is singular at lambda = {lambda} (pivot {pivot:e})")]
    SingularSystem { lambda: f64, pivot: f64 },

    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("expansion order mismatch: expected {expected}, got {got}")]
    OrderMismatch { expected: usize, got: usize },

    #[error("tree error: {0}")]
    Tree(String),

    #[error("table cache error: {0}")]
    Cache(String),

    #[error("direct summation over {n} particles exceeds the guard of {limit}")]
    CostGuard { n: usize, limit: usize },

    #[error("invalid input: {0}")]
    Invalid(String),
}
