//! Polynomial and rational-function arithmetic over the reals.

mod poly;
mod roots;
mod tf;

pub use poly::Polynomial;
pub use roots::{poly_roots, poly_roots_with_axis, root_list, HalfPlane, RootSet, DEFAULT_AXIS_TOL, DEFAULT_ROOT_TOL};
pub use tf::{limit_sl, tf_arith, tf_eval, tf_minreal, Cancellation, RationalTF, TfOp};
