//! Restricted solving and the full pipeline: radius, hypotheses, restricted
//! solutions, lifting, and problem-native re-validation.

use serde::{Deserialize, Serialize};

use crate::coercivity::{find_coercive_radius, verify_native, UccReport, FAR_SAMPLES};
use crate::error::{QeqError, Result};
use crate::instance::{Numerics, ProblemInstance, ProblemKind};
use crate::linalg::Point;
use crate::map::restrict_to_ball;
use crate::reductions::gnep::{check_gnep_equilibrium, GnepCheck};
use crate::reductions::qvi::{check_qvi_solution, QviCheck};
use crate::region::ConvexRegion;
use crate::solver::check::{check_qep_solution, CheckParams};
use crate::solver::fixed::fixed_point_set;
use crate::solver::hypotheses::{check_own_block_convexity, verify_theorem_hypotheses, HypothesisReport, Variant};
use crate::solver::lift::{lift_with_checks, lifting_checks, LiftReport};

/// Grid solutions of the problem restricted to `C ∩ B̄_ρ` with `K_ρ = K ∩ B̄_ρ`:
/// grid fixed points of `K_ρ` that pass the QEP check on the window `B̄_{2ρ}`.
pub fn solve_restricted(inst: &ProblemInstance, rho: f64) -> Result<Vec<Point>> {
    let nm = &inst.numerics;
    let k_rho = restrict_to_ball(&inst.k, rho)?;
    let region = inst.c.intersect_origin_ball(rho)?;
    if region.is_empty() {
        return Err(QeqError::EmptyFixedPointSet);
    }
    let fixed = fixed_point_set(&k_rho, &region, nm.grid_h, nm.tol_feas)?;
    if fixed.is_empty() {
        return Err(QeqError::EmptyFixedPointSet);
    }
    let window = ConvexRegion::origin_ball(inst.n, 2.0 * rho)?;
    let params = CheckParams::grid(nm.grid_h, nm.tol_feas, nm.tol_sol);
    let mut out = Vec::new();
    for x in fixed.points {
        if check_qep_solution(&k_rho, &inst.f, &x, &window, params)?.ok {
            out.push(x);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub variant: Variant,
    /// Overrides `numerics.rho`; without either the radius is searched.
    pub rho: Option<f64>,
    pub rho_max: f64,
    pub budget: usize,
    pub seed: u64,
    /// Lifting checks run on `B̄_{verify_factor·ρ}`.
    pub verify_factor: f64,
}

impl SolveOptions {
    pub fn new(variant: Variant) -> Self {
        SolveOptions {
            variant,
            rho: None,
            rho_max: 64.0,
            budget: 2000,
            seed: 0,
            verify_factor: 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoSource {
    Given,
    Searched,
    NotFound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub instance: String,
    pub kind: ProblemKind,
    pub variant: Variant,
    pub rho: Option<f64>,
    pub rho_source: RhoSource,
    pub ucc: Option<UccReport>,
    pub hypothesis: Option<HypothesisReport>,
    pub solutions: Vec<Point>,
    pub lift: Vec<LiftReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qvi_checks: Option<Vec<QviCheck>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equilibrium_checks: Option<Vec<GnepCheck>>,
    pub notes: Vec<String>,
    pub numerics: Numerics,
}

impl SolveReport {
    /// A hypothesis (coercivity included) or a lifting check has a counterexample.
    pub fn is_refuted(&self) -> bool {
        let ucc_failed = self.ucc.as_ref().is_some_and(|u| !u.pass) || self.rho_source == RhoSource::NotFound;
        let hyp = self.hypothesis.as_ref().is_some_and(|h| h.is_refuted());
        let lift = self.lift.iter().any(|l| l.is_refuted());
        ucc_failed || hyp || lift
    }
}

/// Radius, hypotheses, restricted solutions and lifting in one report. An empty
/// solution list next to refuted hypotheses is a legitimate outcome.
pub fn solve(inst: &ProblemInstance, opts: &SolveOptions) -> Result<SolveReport> {
    let mut notes = Vec::new();
    let given = opts.rho.or(inst.numerics.rho);
    let (rho, rho_source, ucc) = match given {
        Some(r) => (Some(r), RhoSource::Given, Some(verify_native(inst, r, FAR_SAMPLES, opts.seed)?)),
        None => match find_coercive_radius(inst, 1.0, opts.rho_max, FAR_SAMPLES, opts.seed)? {
            Some(rep) => (Some(rep.rho), RhoSource::Searched, Some(rep)),
            None => (None, RhoSource::NotFound, None),
        },
    };
    let mut report = SolveReport {
        instance: inst.name.clone(),
        kind: inst.kind,
        variant: opts.variant,
        rho,
        rho_source,
        ucc,
        hypothesis: None,
        solutions: Vec::new(),
        lift: Vec::new(),
        qvi_checks: None,
        equilibrium_checks: None,
        notes: Vec::new(),
        numerics: inst.numerics.clone(),
    };
    let Some(rho) = rho else {
        notes.push(format!("no coercive radius found up to {}", opts.rho_max));
        report.notes = notes;
        return Ok(report);
    };

    let mut hyp = verify_theorem_hypotheses(inst, opts.variant, rho, opts.budget, opts.seed)?;
    if let Some(game) = inst.game() {
        let v = check_own_block_convexity(game);
        if v.failed() {
            hyp.refuted.push(v.property.clone());
        }
        hyp.verdicts.push(v);
    }
    report.hypothesis = Some(hyp);

    let solutions = match solve_restricted(inst, rho) {
        Ok(s) => s,
        Err(QeqError::EmptyFixedPointSet) => {
            notes.push("no grid fixed point of the restricted map".into());
            Vec::new()
        }
        Err(e) => return Err(e),
    };
    let ucc_passed = report.ucc.as_ref().is_some_and(|u| u.pass);
    if !solutions.is_empty() {
        let checks = lifting_checks(inst, rho, opts.verify_factor, opts.budget, opts.seed)?;
        for x in &solutions {
            report
                .lift
                .push(lift_with_checks(inst, x, rho, ucc_passed, opts.verify_factor, checks.clone())?);
        }
    }

    let nm = &inst.numerics;
    let window_radius = opts.verify_factor * rho;
    if let Some(op) = inst.operator() {
        let window = ConvexRegion::origin_ball(inst.n, window_radius)?;
        let params = CheckParams::grid(nm.grid_h, nm.tol_feas, nm.tol_sol);
        let checks = solutions
            .iter()
            .map(|x| check_qvi_solution(op, &inst.k, x, &window, params))
            .collect::<Result<Vec<_>>>()?;
        report.qvi_checks = Some(checks);
    }
    if let Some(game) = inst.game() {
        let checks = solutions
            .iter()
            .map(|x| check_gnep_equilibrium(game, x, nm.grid_h, nm.tol_feas, nm.tol_sol, window_radius))
            .collect::<Result<Vec<_>>>()?;
        if checks.iter().any(|c| !c.ok) {
            notes.push("some restricted solutions fail the equilibrium re-check".into());
        }
        report.equilibrium_checks = Some(checks);
    }
    report.solutions = solutions;
    report.notes = notes;
    Ok(report)
}
