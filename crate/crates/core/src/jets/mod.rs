//! Exact jets: truncated power series in `(z, z̄)` and the Kähler quantities
//! built from them.

mod index;
mod jet;
mod metric;
pub mod scalar;

pub use index::{binomial, factorial, Monomial, MultiIndex};
pub use jet::{jet_arith, Jet, JetOp, VarKind};
pub use metric::{
    diagonal_quadratic_potential, fubini_study_potential, invert_jet_matrix, laplacian, metric_from_potential,
    poisson_bracket, MetricJets,
};
pub use scalar::Scalar;

/// Precision assigned to exact polynomials (test monomials, constant
/// operator coefficients). Large enough never to bind.
pub const EXACT: i32 = 1 << 20;
