//! Mixed-integer linear programming toolkit: a solver-independent model,
//! a CPLEX LP-format writer and an exact branch-and-bound solver built on a
//! dense bounded-variable simplex method.

mod branch;
mod dense_lu;
mod error;
mod lp_format;
mod model;
mod simplex;

pub use branch::{solve_milp, MilpSolution, SolveStatus, SolverParams};
pub use error::{ModelError, ParamError};
pub use lp_format::{export_lp, format_g17};
pub use model::{
    Comparator, ConstrId, Constraint, Evaluation, MilpModel, Objective, VarId, VarKind, Variable,
    FEASIBILITY_TOL,
};
pub use simplex::{solve_lp, LpSolution, LpStatus};
