//! Fixed points, solution checks, hypothesis falsifiers, lifting, the solve
//! pipeline and the brute-force oracle.

pub mod check;
pub mod fixed;
pub mod hypotheses;
pub mod lift;
pub mod oracle;
pub mod pipeline;

pub use check::{check_mqep_solution, check_qep_solution, CheckParams, SolutionCheck};
pub use fixed::{fixed_point_set, FixedPointSet};
pub use hypotheses::{verify_theorem_hypotheses, HypothesisReport, Variant};
pub use lift::{lift_solution, LiftReport, LiftStatus};
pub use oracle::oracle_enumerate;
pub use pipeline::{solve, solve_restricted, SolveOptions, SolveReport};
