//! Fourier diagram calculus for nonlinear iterative algorithms on Wigner
//! random matrices.
//!
//! The crate has three layers:
//!
//! * exact symbolic algebra on diagram expressions ([`diagram`], [`canon`],
//!   [`expr`], [`classify`], [`algebra`], [`eval`]);
//! * the asymptotic Gaussian space spanned by Hermite-tree characters, with
//!   state evolution for general first-order methods, AMP, and iterative AMP
//!   ([`hermite`], [`tree`], [`poly`], [`evolution`]);
//! * numeric execution on sampled matrices plus exact and Monte Carlo
//!   verification oracles ([`matrix`], [`ensemble`], [`program`], [`engine`],
//!   [`verify`]).

pub mod algebra;
pub mod canon;
pub mod classify;
pub mod coeff;
pub mod diagram;
pub mod engine;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod evolution;
pub mod expr;
pub mod hermite;
pub mod matrix;
pub mod poly;
pub mod program;
pub mod rng;
pub mod tree;
pub mod verify;

pub use canon::{canonicalize, CanonicalDiagram};
pub use coeff::{rat, Coefficient, Rat};
pub use diagram::{Diagram, EdgeLabel};
pub use error::{Error, Result};
pub use expr::{DiagramExpression, ExprKind};

/// Size and cost budgets shared by the symbolic and numeric layers.
#[derive(Debug, Clone)]
pub struct Limits {
    /// Maximum number of non-root vertices partitioned in one product.
    pub product_vertex_budget: usize,
    /// Maximum n^|U| work for one contraction step in moebius evaluation.
    pub contraction_cost: u64,
    /// Maximum n^|V| work for one naive evaluation.
    pub naive_cost: u64,
    /// Largest n for which dense cavity-message storage is allowed.
    pub bp_max_n: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            product_vertex_budget: 12,
            contraction_cost: 1 << 31,
            naive_cost: 1 << 31,
            bp_max_n: 4096,
        }
    }
}
