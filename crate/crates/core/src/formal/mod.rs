//! Formal ν-graded differential and bidifferential operators and star-product
//! tables built from them.

mod bidiff;
mod ops;
mod star;
mod transform;

pub use bidiff::BiDiffOp;
pub use ops::{invert_transform, op_apply, op_compose, DiffOp, NuDiffOp};
pub use star::{assoc_defect, detect_convention, opposite_star, star_eval, Convention, StarTable};
pub(crate) use transform::{anti_monomial, holo_monomial, solve_type_kk};
pub use transform::{conjugate_star, dual_star, polarize, transform_from_star};
