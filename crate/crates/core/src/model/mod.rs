//! Problem data, decision variables and their evaluation.

mod allocation;
mod constraints;
mod feasibility;
mod objective;
mod scenario;

pub use allocation::{Allocation, SlackState};
pub use constraints::ConstraintSet;
pub use feasibility::{
    check_feasibility, leakage_interference, FeasibilityReport, DEFAULT_FEASIBILITY_TOL,
};
pub(crate) use objective::approx_rate_unchecked;
pub use objective::{approx_rate, objective_min, objective_sum, per_user_totals};
pub use scenario::{Geometry, Position, Scenario};
