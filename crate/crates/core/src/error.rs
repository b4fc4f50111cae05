//! Error taxonomy shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid diagram: {0}")]
    InvalidDiagram(String),

    #[error("expression kind mismatch: expected {expected}, found {found}")]
    KindMismatch { expected: &'static str, found: &'static str },

    #[error("{what} exceeds budget: needed {needed}, limit {limit}")]
    BudgetExceeded { what: String, needed: usize, limit: usize },

    #[error("diagram has no hanging double edge")]
    NoHangingDoubleEdge,

    #[error("improper diagram: {0}")]
    ImproperDiagram(String),

    #[error("coefficient has mixed exponents; split terms before classifying")]
    MixedExponent,

    #[error("non-finite value produced at step {step}")]
    NonFinite { step: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("contraction width exceeded: tensor over {width} free indices at n = {n}")]
    ContractionWidth { width: usize, n: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("internal consistency violation: {0}")]
    Internal(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
