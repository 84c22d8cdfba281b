//! Reflection design: problem construction, the PDD solver, closed-form
//! solutions and an exhaustive grid oracle for small surfaces.

mod closed_form;
mod oracle;
mod pdd;
mod problem;
pub mod subproblem;

pub use closed_form::{closed_form_lrs_only, closed_form_urs_null, closed_form_urs_null_single_axis, Axis};
pub use oracle::{brute_force_oracle, OracleResult, ORACLE_BUDGET};
pub use pdd::{
    dual_and_penalty_update, inner_theta_update, inner_vartheta_update, pdd_solve, PddParams, PddSolution,
    PddState, SolveStatus, ThetaUpdate, TraceEntry,
};
pub use problem::{build_problem, ProblemCase, ProblemData, ProblemInputs};
