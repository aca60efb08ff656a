//! Linear programming and the least core.

mod least_core;
mod simplex;

pub use least_core::{
    check_feasibility, is_feasible, least_core, least_core_detailed, least_core_lp, max_excess,
    max_excess_coalition, FeasibilityReport, Formulation, LeastCoreOptions, LeastCoreSolution,
    LeastCoreTarget, Violation, MAX_REPORTED_VIOLATIONS, NAIVE_PLAYER_CAP,
};
pub use simplex::{
    solve_lp, BasisLabel, Constraint, LinearProgram, LpSolution, LpStatus, Sense, LP_TOLERANCE,
};
