//! Primal-dual majorization-minimization for A/D/E-optimal orientations.

mod dual;
mod scalar;
mod solver;
mod surrogate;

pub use dual::{dual_update_ad, dual_update_e, project_spectraplex, DualOutcome, InnerOptions};
pub use scalar::{scalar_cubic_root, scalar_quadratic_root};
pub use solver::{initial_phi, solve, solve_3d_toa_rss, DesignResult, IterationRecord, SolverOptions, Status};
pub(crate) use surrogate::trace_product;
pub use surrogate::{
    dual_objective, fenchel_min_value, primal_update, surrogate_lower_bound, surrogate_upper_bound_norm, DualState,
    Penalty, PrimalSurrogate, NORM_FLOOR,
};
