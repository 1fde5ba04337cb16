//! QVI and GNEP frontends.

pub mod gnep;
pub mod qvi;

use crate::error::{QeqError, Result};
use crate::instance::{ProblemInstance, ProblemKind};
use crate::solver::hypotheses::Variant;
use crate::solver::pipeline::{solve, SolveOptions, SolveReport};

/// Assumption sets for existence of a generalized Nash equilibrium.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GnepAssumptions {
    /// Closed `fix(K)` and lower semicontinuous `K_ν`: solved through `case2`.
    LowerSemicontinuous,
    /// Closed `K_ν` and an open improvement set: solved through `lassonde`.
    ClosedGraph,
}

impl GnepAssumptions {
    pub fn variant(self) -> Variant {
        match self {
            GnepAssumptions::LowerSemicontinuous => Variant::Case2,
            GnepAssumptions::ClosedGraph => Variant::Lassonde,
        }
    }
}

/// Solves `QEP(f^{NI}, ∏K_ν)` on `∏C_ν` and re-validates every solution with
/// the per-player best-response check.
pub fn gnep_solve(inst: &ProblemInstance, assumptions: GnepAssumptions, opts: &SolveOptions) -> Result<SolveReport> {
    if inst.kind != ProblemKind::Gnep {
        return Err(QeqError::InvalidArgument("instance is not a GNEP".into()));
    }
    let opts = SolveOptions {
        variant: assumptions.variant(),
        ..*opts
    };
    solve(inst, &opts)
}
