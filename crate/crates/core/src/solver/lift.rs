//! Lifting restricted solutions to the unrestricted problem.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::instance::ProblemInstance;
use crate::linalg::Point;
use crate::properties::PropertyVerdict;
use crate::region::ConvexRegion;
use crate::solver::check::{check_qep_solution, CheckParams};
use crate::solver::hypotheses::{lifting_hypotheses, refuted_names, Probe};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LiftStatus {
    /// Coercivity and the lifting hypotheses passed their checks.
    CertifiedByTheorem,
    /// No violation on `K(x0) ∩ B̄_radius`, but some hypothesis was refuted.
    VerifiedOnBall { radius: f64 },
    Refuted { y: Point, value: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftReport {
    pub x0: Point,
    #[serde(flatten)]
    pub status: LiftStatus,
    pub checks: Vec<PropertyVerdict>,
}

impl LiftReport {
    pub fn is_refuted(&self) -> bool {
        matches!(self.status, LiftStatus::Refuted { .. })
    }

    pub fn is_certified(&self) -> bool {
        matches!(self.status, LiftStatus::CertifiedByTheorem)
    }
}

/// Lifting hypotheses on `B̄_{verify_factor·ρ}`: the implication condition and
/// `f(x,x) = 0` on `fix(K)` (convex values hold by construction). They do not
/// depend on the solution being lifted.
pub fn lifting_checks(inst: &ProblemInstance, rho: f64, verify_factor: f64, budget: usize, seed: u64) -> Result<Vec<PropertyVerdict>> {
    let probe = Probe::new(inst, rho, budget, seed);
    lifting_hypotheses(&probe, verify_factor * rho)
}

/// Checks `f(x0, y) ≥ −tol` on `K(x0) ∩ B̄_{verify_factor·ρ}` and the lifting
/// hypotheses.
pub fn lift_solution(
    inst: &ProblemInstance,
    x0: &[f64],
    rho: f64,
    ucc_passed: bool,
    verify_factor: f64,
    budget: usize,
    seed: u64,
) -> Result<LiftReport> {
    let checks = lifting_checks(inst, rho, verify_factor, budget, seed)?;
    lift_with_checks(inst, x0, rho, ucc_passed, verify_factor, checks)
}

/// [`lift_solution`] with the lifting hypotheses already checked.
pub fn lift_with_checks(
    inst: &ProblemInstance,
    x0: &[f64],
    rho: f64,
    ucc_passed: bool,
    verify_factor: f64,
    checks: Vec<PropertyVerdict>,
) -> Result<LiftReport> {
    let radius = verify_factor * rho;
    let hypotheses_hold = refuted_names(&checks).is_empty();
    let nm = &inst.numerics;
    let window = ConvexRegion::origin_ball(inst.n, radius)?;
    let params = CheckParams::grid(nm.grid_h, nm.tol_feas, nm.tol_sol);
    let check = check_qep_solution(&inst.k, &inst.f, x0, &window, params)?;
    let status = match (check.ok, check.argument, check.value) {
        (false, Some(y), Some(value)) => LiftStatus::Refuted { y, value },
        _ if ucc_passed && hypotheses_hold => LiftStatus::CertifiedByTheorem,
        _ => LiftStatus::VerifiedOnBall { radius },
    };
    Ok(LiftReport {
        x0: Point(x0.to_vec()),
        status,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bifunction::{Bifunction, BuiltinBifunction, QuadraticBifunction};
    use crate::instance::Numerics;
    use crate::linalg::Matrix;
    use crate::map::{AffineClamp, SetValuedMap};

    #[test]
    fn e3_solution_is_certified() {
        let k = SetValuedMap::moving_box(
            1,
            vec![AffineClamp::new(vec![0.5], 0.0, 0.0, 1.0)],
            vec![AffineClamp::new(vec![0.5], 1.0, 1.0, 2.0)],
        )
        .unwrap();
        let f: Bifunction = QuadraticBifunction {
            p: Matrix::scalar(-1.0),
            r: Matrix::scalar(1.0),
            c: vec![1.0],
            d: vec![-1.0],
            ..QuadraticBifunction::zero(1)
        }
        .into();
        let inst =
            ProblemInstance::qep("e3", ConvexRegion::interval(0.0, f64::INFINITY), k, f, Numerics::new(0.01)).unwrap();
        let rep = lift_solution(&inst, &[1.0], 3.0, true, 2.0, 2000, 0).unwrap();
        assert!(rep.is_certified(), "{rep:#?}");
    }

    #[test]
    fn nonzero_diagonal_blocks_certification() {
        let c = ConvexRegion::interval(-1.0, 1.0);
        let inst = ProblemInstance::qep(
            "one",
            c.clone(),
            SetValuedMap::constant(c),
            QuadraticBifunction::constant(1, 1.0).into(),
            Numerics::new(0.01),
        )
        .unwrap();
        let rep = lift_solution(&inst, &[0.0], 1.0, true, 2.0, 2000, 0).unwrap();
        assert_eq!(rep.status, LiftStatus::VerifiedOnBall { radius: 2.0 });
        assert!(rep.checks.iter().any(|v| v.property == "diagonal_vanishes_on_fixed_points" && v.failed()));
    }

    #[test]
    fn far_dip_is_refuted_outside_the_ball() {
        let c = ConvexRegion::interval(-10.0, 10.0);
        let inst = ProblemInstance::qep(
            "far-dip",
            c.clone(),
            SetValuedMap::constant(c),
            Bifunction::Builtin {
                name: BuiltinBifunction::FarDip,
            },
            Numerics::new(0.01),
        )
        .unwrap();
        let rep = lift_solution(&inst, &[0.0], 2.0, true, 4.0, 2000, 0).unwrap();
        match rep.status {
            LiftStatus::Refuted { y, value } => {
                assert!(y[0].abs() > 3.0 && value < -1e-6);
            }
            other => panic!("expected refutation, got {other:?}"),
        }
    }
}
