use thiserror::Error;

use crate::llt::RateTable;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be at least 1")]
    ZeroDimension,

    #[error("basis too large: {entries} multi-indices exceeds the cap of {cap}")]
    BasisTooLarge { entries: u128, cap: usize },

    #[error("incompatible bases: (d={left_dim}, K={left_degree}) vs (d={right_dim}, K={right_degree})")]
    IncompatibleBases { left_dim: usize, left_degree: usize, right_dim: usize, right_degree: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("insufficient degree: need K >= {required}, space has K = {actual}")]
    InsufficientDegree { required: usize, actual: usize },

    #[error("coefficient vector has length {got}, basis has {expected} entries")]
    CoefficientLength { expected: usize, got: usize },

    #[error("Gamma(lambda) is defined for lambda in [0, 1], got {0}")]
    InvalidLambda(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("not a normalized density: degree-0 coefficient is {0}")]
    NotNormalized(f64),

    #[error("assumption violation ({assumption}): {detail}")]
    AssumptionViolation { assumption: &'static str, detail: String },

    #[error("density validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("envelope too small: f({point:?}) = {value} exceeds envelope {envelope}")]
    EnvelopeBreach { point: Vec<f64>, value: f64, envelope: f64 },

    #[error("non-finite drift evaluation on path {path}")]
    NonFiniteDrift { path: usize },

    #[error("Novikov check failed (numeric): exponent overflow on path {path}")]
    NovikovOverflow { path: usize },

    #[error("matrix is not symmetric: |G[{row}][{col}] - G[{col}][{row}]| = {gap}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("rate bound violated at n = {n}: distance {distance} > bound {bound} + error {error}")]
    BoundViolation { n: usize, distance: f64, bound: f64, error: f64, table: Box<RateTable> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite value cannot be serialized: {0}")]
    NonFinite(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
