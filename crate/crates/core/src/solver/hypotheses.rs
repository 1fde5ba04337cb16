//! Falsification of the existence-theorem hypotheses on a concrete instance.

use serde::{Deserialize, Serialize};

use crate::bifunction::Bifunction;
use crate::error::Result;
use crate::instance::ProblemInstance;
use crate::linalg::Point;
use crate::map::SetValuedMap;
use crate::properties::{
    check_diagonal, check_implication, check_lattice_values_convex, check_nonempty_values,
    check_properly_quasi_monotone, check_quasiconvex_y, check_semistrict_quasiconvex_y, check_upper_sign,
    check_usc_first_argument, falsify_closed_graph, falsify_fixed_set_closed, falsify_lsc, falsify_lsc_on,
    falsify_open_set, Lattice, LatticeMap, PropertyVerdict, SampleDomain, Witness, DEFAULT_KAPPA, VIOLATION_TOL,
};
use crate::region::ConvexRegion;
use crate::solver::check::minimize_on;
use crate::solver::fixed::fixed_point_set;

/// Which existence theorem's hypotheses to test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Proper quasi-monotonicity, upper sign property, lower semicontinuous `G`.
    Case1,
    /// `f(x,x) ≥ 0` on `fix(K)`, lower semicontinuous convex-valued `R`.
    Case2,
    /// Closed `K`, usc `f(·,y)`, quasiconvex `f(x,·)`, open `D`, vanishing diagonal.
    Lassonde,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Case1 => "case1",
            Variant::Case2 => "case2",
            Variant::Lassonde => "lassonde",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "case1" => Ok(Variant::Case1),
            "case2" => Ok(Variant::Case2),
            "lassonde" => Ok(Variant::Lassonde),
            other => Err(format!("unknown variant {other:?} (expected case1, case2 or lassonde)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub variant: Variant,
    pub rho: f64,
    /// Lattice spacing used by the probes.
    pub h: f64,
    pub verdicts: Vec<PropertyVerdict>,
    /// Hypotheses with a confirmed counterexample.
    pub refuted: Vec<String>,
    pub notes: Vec<String>,
}

impl HypothesisReport {
    pub fn is_refuted(&self) -> bool {
        !self.refuted.is_empty()
    }

    pub fn verdict(&self, property: &str) -> Option<&PropertyVerdict> {
        self.verdicts.iter().find(|v| v.property == property)
    }

    pub(crate) fn from_verdicts(variant: Variant, rho: f64, h: f64, verdicts: Vec<PropertyVerdict>) -> Self {
        let refuted = refuted_names(&verdicts);
        HypothesisReport {
            variant,
            rho,
            h,
            verdicts,
            refuted,
            notes: vec!["convex values hold by construction of the map".into()],
        }
    }
}

/// The semistrict quasiconvexity verdict is only a sufficient condition for the
/// implication; it refutes nothing when the raw implication check passes.
pub(crate) fn refuted_names(verdicts: &[PropertyVerdict]) -> Vec<String> {
    let raw_ok = verdicts.iter().any(|v| v.property == "implication" && v.passed());
    verdicts
        .iter()
        .filter(|v| v.failed())
        .filter(|v| !(v.property == "semistrict_quasiconvex_y" && raw_ok))
        .map(|v| v.property.clone())
        .collect()
}

/// Probe data shared by the hypothesis checks.
pub(crate) struct Probe<'a> {
    pub c: &'a ConvexRegion,
    pub k: &'a SetValuedMap,
    pub f: &'a Bifunction,
    pub rho: f64,
    pub h: f64,
    pub tol_feas: f64,
    pub budget: usize,
    pub seed: u64,
}

impl<'a> Probe<'a> {
    pub fn new(inst: &'a ProblemInstance, rho: f64, budget: usize, seed: u64) -> Self {
        Probe {
            c: &inst.c,
            k: &inst.k,
            f: &inst.f,
            rho,
            h: inst.numerics.grid_h,
            tol_feas: inst.numerics.tol_feas,
            budget,
            seed,
        }
    }

    /// `C ∩ B̄_radius` as a sampling domain.
    pub fn domain(&self, radius: f64) -> SampleDomain {
        SampleDomain::new(self.c.clone(), radius, self.h)
    }

    /// Grid fixed points of `K` in `C ∩ B̄_radius`, on the probe lattice.
    pub fn fixed_lattice(&self, radius: f64) -> Result<Lattice> {
        let lat = self.domain(radius).lattice()?;
        let region = self.c.intersect_origin_ball(radius)?;
        if region.is_empty() {
            return Ok(Lattice::new(Vec::new(), lat.h));
        }
        let fixed = fixed_point_set(self.k, &region, lat.h, self.tol_feas)?;
        Ok(Lattice::new(fixed.points, lat.h))
    }

    /// The implication condition: semistrict quasiconvexity in `y` (sufficient)
    /// and the raw implication sampled on `fix(K) ∩ B̄_radius`.
    pub fn implication(&self, radius: f64) -> Result<Vec<PropertyVerdict>> {
        let semi = check_semistrict_quasiconvex_y(self.f, &self.domain(radius), self.budget, self.seed)?;
        let fixed = self.fixed_lattice(radius)?;
        let mut rng = crate::properties::seeded(self.seed ^ 0x5eed);
        let xs = fixed.subsample(200, &mut rng);
        let raw = check_implication(self.f, self.k, &xs, radius, fixed.h, self.budget, self.seed)?;
        Ok(vec![semi, raw])
    }
}

/// Lattice approximation of `x ↦ {y ∈ grid(K(x) ∩ B̄_radius) : keep(x, y)}`.
fn filtered_map<'a>(
    k: &'a SetValuedMap,
    radius: f64,
    h: f64,
    keep: impl Fn(&[f64], &[f64]) -> bool + 'a,
) -> LatticeMap<'a> {
    LatticeMap::new(move |x: &[f64]| {
        let value = k.evaluate(x)?.intersect_origin_ball(radius)?;
        if value.is_empty() {
            return Ok(Vec::new());
        }
        Ok(value.grid_points(h, radius)?.into_iter().filter(|y| keep(x, y)).collect())
    })
}

/// Runs the falsifiers for the chosen theorem at coercive radius `rho`.
pub fn verify_theorem_hypotheses(
    inst: &ProblemInstance,
    variant: Variant,
    rho: f64,
    budget: usize,
    seed: u64,
) -> Result<HypothesisReport> {
    let probe = Probe::new(inst, rho, budget, seed);
    let wide = 2.0 * rho;
    let mut verdicts = Vec::new();
    let h = probe.domain(rho).lattice()?.h;

    match variant {
        Variant::Case1 | Variant::Case2 => {
            verdicts.push(falsify_lsc(probe.k, &probe.domain(wide), DEFAULT_KAPPA, budget, seed)?);
            verdicts.push(check_nonempty_values(probe.k, &probe.domain(wide), budget, seed)?);
            verdicts.push(falsify_fixed_set_closed(
                probe.k,
                &probe.domain(wide),
                DEFAULT_KAPPA,
                probe.tol_feas,
                budget,
                seed,
            )?);
            verdicts.extend(probe.implication(wide)?);
        }
        Variant::Lassonde => {
            verdicts.push(falsify_closed_graph(probe.k, &probe.domain(wide), budget, seed)?);
            verdicts.push(check_nonempty_values(probe.k, &probe.domain(wide), budget, seed)?);
            verdicts.push(check_usc_first_argument(probe.f, &probe.domain(rho), budget, seed)?);
            verdicts.push(check_quasiconvex_y(probe.f, &probe.domain(rho), budget, seed)?);
            verdicts.push(d_openness(&probe)?);
            let pts = probe.domain(rho).lattice()?.points;
            verdicts.push(check_diagonal(probe.f, &pts, true));
            verdicts.extend(probe.implication(wide)?);
        }
    }

    match variant {
        Variant::Case1 => {
            verdicts.push(check_properly_quasi_monotone(probe.f, &probe.domain(wide), 4, budget, seed)?);
            verdicts.push(check_upper_sign(probe.f, &probe.domain(wide), budget, 9, seed)?);
            let fixed = probe.fixed_lattice(rho)?;
            let f = probe.f;
            let g = filtered_map(probe.k, rho, fixed.h, move |x, y| f.eval(y, x) > 0.0);
            let mut v = falsify_lsc_on(&g, &fixed, DEFAULT_KAPPA, rho, budget, seed)?;
            v.property = "lsc_of_g".into();
            verdicts.push(v);
        }
        Variant::Case2 => {
            let fixed = probe.fixed_lattice(wide)?;
            let mut diag = check_diagonal(probe.f, &fixed.points, false);
            diag.property = "diagonal_nonnegative_on_fixed_points".into();
            verdicts.push(diag);
            let f = probe.f;
            let r = filtered_map(probe.k, wide, fixed.h, move |x, y| f.eval(x, y) < 0.0);
            let inner = probe.fixed_lattice(rho)?;
            let mut v = falsify_lsc_on(&r, &inner, DEFAULT_KAPPA, wide, budget, seed)?;
            v.property = "lsc_of_r".into();
            verdicts.push(v);
            let mut rng = crate::properties::seeded(seed);
            let xs = inner.subsample(200, &mut rng);
            let mut cv = check_lattice_values_convex(
                &xs,
                &r,
                |x, yt| {
                    let v = f.eval(x, yt);
                    Ok((v >= 0.0).then_some(v))
                },
                budget,
                seed,
            )?;
            cv.property = "convex_values_of_r".into();
            verdicts.push(cv);
        }
        Variant::Lassonde => {}
    }
    Ok(HypothesisReport::from_verdicts(variant, rho, h, verdicts))
}

/// `D = {x ∈ C ∩ B̄_ρ : inf_{y ∈ K(x) ∩ B̄_ρ} f(x,y) < 0}` must be open in
/// `C ∩ B̄_ρ`; the falsifier looks for isolated lattice points of `D`.
fn d_openness(probe: &Probe<'_>) -> Result<PropertyVerdict> {
    let lat = probe.domain(probe.rho).lattice()?;
    let h = lat.h;
    let rho = probe.rho;
    falsify_open_set(
        &lat,
        |x: &Point| {
            let region = probe.k.evaluate(x)?.intersect_origin_ball(rho)?;
            let found = minimize_on(&region, h, x, |y| probe.f.eval(x, y), |y| probe.f.grad_y(x, y))?;
            Ok(match found {
                Some((_, v)) => (v < -VIOLATION_TOL, v),
                None => (false, f64::INFINITY),
            })
        },
        "open_d",
    )
}

/// Prop-3.3-style lifting hypotheses on `fix(K) ∩ B̄_radius`: the implication
/// condition and `f(x,x) = 0`.
pub(crate) fn lifting_hypotheses(probe: &Probe<'_>, radius: f64) -> Result<Vec<PropertyVerdict>> {
    let mut out = probe.implication(radius)?;
    let fixed = probe.fixed_lattice(radius)?;
    let mut diag = check_diagonal(probe.f, &fixed.points, true);
    diag.property = "diagonal_vanishes_on_fixed_points".into();
    out.push(diag);
    Ok(out)
}

/// Own-block convexity of every player's cost (`λ_min ≥ −1e-9`).
pub fn check_own_block_convexity(game: &crate::reductions::gnep::Game) -> PropertyVerdict {
    const NAME: &str = "own_block_convexity";
    for nu in 0..game.players.len() {
        let eigenvalue = game.own_block_min_eigenvalue(nu);
        if eigenvalue < -VIOLATION_TOL {
            return PropertyVerdict::fail(NAME, nu + 1, Witness::OwnBlock { player: nu, eigenvalue });
        }
    }
    PropertyVerdict::pass(NAME, game.players.len(), false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bifunction::QuadraticBifunction;
    use crate::instance::Numerics;
    use crate::linalg::Matrix;
    use crate::map::AffineClamp;

    fn e3() -> ProblemInstance {
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
        ProblemInstance::qep("e3", ConvexRegion::interval(0.0, f64::INFINITY), k, f, Numerics::new(0.01)).unwrap()
    }

    #[test]
    fn e3_case2_all_pass() {
        let r = verify_theorem_hypotheses(&e3(), Variant::Case2, 3.0, 2000, 1).unwrap();
        assert!(!r.is_refuted(), "{:#?}", r.refuted);
    }

    #[test]
    fn constant_one_fails_proper_quasi_monotonicity() {
        let c = ConvexRegion::interval(-1.0, 1.0);
        let inst = ProblemInstance::qep(
            "one",
            c.clone(),
            SetValuedMap::constant(c),
            QuadraticBifunction::constant(1, 1.0).into(),
            Numerics::new(0.01),
        )
        .unwrap();
        let r = verify_theorem_hypotheses(&inst, Variant::Case1, 2.0, 2000, 1).unwrap();
        assert!(r.verdict("properly_quasi_monotone").unwrap().failed());
        assert!(r.refuted.contains(&"properly_quasi_monotone".to_string()));
    }

    #[test]
    fn constant_compact_map_passes_lassonde_checks() {
        let c = ConvexRegion::interval(-1.0, 1.0);
        let inst = ProblemInstance::qep(
            "even",
            c.clone(),
            SetValuedMap::constant(c),
            QuadraticBifunction::difference_of(Matrix::scalar(1.0), vec![0.0]).into(),
            Numerics::new(0.01),
        )
        .unwrap();
        let r = verify_theorem_hypotheses(&inst, Variant::Lassonde, 2.0, 2000, 1).unwrap();
        assert!(r.verdict("closed_graph").unwrap().passed());
        assert!(r.verdict("open_d").unwrap().passed());
        assert!(!r.is_refuted(), "{:#?}", r.refuted);
    }
}
