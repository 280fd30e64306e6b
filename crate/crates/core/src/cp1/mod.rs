//! Berezin-Toeplitz quantization of the Riemann sphere.
//!
//! Chart `z`, `ω = i dz∧dz̄/(1+zz̄)²` (volume `2π`), sections of `L^m` are
//! polynomials of degree `≤ m` with `h(s, s) = |s|²(1+zz̄)^{−m}`.

mod asymptotics;
mod context;
mod geometric;
mod observable;
mod symbols;

pub use asymptotics::{
    berezin_defect_series, berezin_point, bms_suite, fit_series, trace_scaling_series, AsymFit, AsymSeries, BmsSuite,
    BRACKET_SIGN,
};
pub use context::{
    bergman_diagonal, coherent_vector, coherent_vector_at, covariant_symbol, covariant_symbol_at, epsilon_at,
    epsilon_function, make_context, operator_norm, toeplitz_matrix, Cp1Context, Grid, OpMatrix, QuadSpec, SpherePoint,
};
pub use geometric::{geometric_quantization, tuynman_defect, X_SIGN};
pub use observable::{beta, ObservableFn, SymTerm};
pub use symbols::{
    adjointness_check, berezin_transform_integral, berezin_transform_num, contravariant_operator,
    contravariant_reconstruct, contravariant_reconstruct_on, sample_points, surjectivity_rank, trace_identity,
    twisted_product, twisted_product_integral, TraceCheck, TwistedIntegral, OVERLAP_CUTOFF, SURJECTIVITY_MAX_LEVEL,
};
