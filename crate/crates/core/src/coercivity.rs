//! Uniform coerciveness condition: a grid verifier, a doubling search for the
//! coercive radius, and the box-candidate sweep for the older compactness-type
//! condition `K(W) ⊆ Z`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bifunction::Bifunction;
use crate::error::{QeqError, Result};
use crate::instance::{ProblemInstance, ProblemKind};
use crate::linalg::{dot, norm, sub, Point};
use crate::map::SetValuedMap;
use crate::properties::{seeded, PropertyVerdict, SampleDomain, Witness, PREMISE_TOL, VIOLATION_TOL};
use crate::reductions::gnep::Game;
use crate::reductions::qvi::Operator;
use crate::region::ConvexRegion;
use crate::solver::fixed::fixed_point_set;

/// Seeded far samples added to the probe lattice of condition 1.
pub const FAR_SAMPLES: usize = 100;
/// Number of violations kept per fixed point.
const MAX_VIOLATIONS: usize = 32;

/// The inequality a cond-2 witness `y` must satisfy for `x`.
#[derive(Clone, Copy, Debug)]
pub enum WitnessRule<'a> {
    /// `f(x,y) ≤ 1e-9`.
    Bifunction(&'a Bifunction),
    /// `⟨x*, y − x⟩ ≤ 1e-9` for every vertex `x*` of `T(x)`.
    Operator(&'a Operator),
    /// `θ_ν(y^ν, x^{−ν}) ≤ θ_ν(x) + 1e-9` for every player.
    Players(&'a Game),
}

impl WitnessRule<'_> {
    pub fn accepts(&self, x: &[f64], y: &[f64]) -> bool {
        match self {
            WitnessRule::Bifunction(f) => f.eval(x, y) <= VIOLATION_TOL,
            WitnessRule::Operator(op) => {
                let d = sub(y, x);
                op.vertices_at(x).iter().all(|v| dot(v, &d) <= VIOLATION_TOL)
            }
            WitnessRule::Players(game) => (0..game.players.len()).all(|nu| {
                let own = game.players[nu].cost.eval(x);
                let moved = game.with_block(x, nu, game.block(y, nu));
                game.players[nu].cost.eval(&moved) <= own + VIOLATION_TOL
            }),
        }
    }

    fn label(&self) -> &'static str {
        match self {
            WitnessRule::Bifunction(_) => "bifunction",
            WitnessRule::Operator(_) => "operator",
            WitnessRule::Players(_) => "players",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cond1 {
    pub pass: bool,
    /// Always `"probed"`: `C` is sampled, not covered.
    pub coverage: String,
    pub probed: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Point>,
}

/// Condition 2 at one grid fixed point `z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cond2Entry {
    pub z: Point,
    /// Largest witness-free `‖x‖` plus `h`; `None` when every scanned `x` has a witness.
    pub rho_z: Option<f64>,
    /// No grid point of `K(z) ∩ B̄_ρ` lies in `[ρ_z, ρ]`.
    pub vacuous: bool,
    pub pass: bool,
    /// Witness-free grid points `x` with `‖x‖ + h ≥ ρ` (truncated).
    pub violations: Vec<Point>,
    pub scanned: usize,
    /// `(x, y)` pairs found by the scan, kept for cross-checks only.
    #[serde(skip)]
    pub witnesses: Vec<(Point, Point)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UccReport {
    pub rho: f64,
    pub pass: bool,
    pub rule: String,
    pub cond1: Cond1,
    pub cond2: Vec<Cond2Entry>,
    pub probe_radius: f64,
    pub grid_h: f64,
}

impl UccReport {
    pub fn fixed_points(&self) -> Vec<Point> {
        self.cond2.iter().map(|e| e.z.clone()).collect()
    }
}

/// Checks condition 1 (`K(w) ∩ B_ρ ≠ ∅` for `w ∈ C`) on the probe lattice of
/// `C ∩ B̄_probe` plus far samples, and condition 2 at every grid fixed point of
/// `K` in `C ∩ B̄_ρ`.
pub fn ucc_verify(inst: &ProblemInstance, rho: f64, far_samples: usize, seed: u64) -> Result<UccReport> {
    verify_with(inst, WitnessRule::Bifunction(&inst.f), rho, far_samples, seed)
}

/// Coercivity of a QVI: the witness inequality holds at every vertex of `T(x)`.
pub fn qvi_ucc_verify(inst: &ProblemInstance, rho: f64, far_samples: usize, seed: u64) -> Result<UccReport> {
    let op = match (inst.kind, inst.operator()) {
        (ProblemKind::Qvi, Some(op)) => op,
        _ => return Err(QeqError::InvalidArgument("instance is not a QVI".into())),
    };
    verify_with(inst, WitnessRule::Operator(op), rho, far_samples, seed)
}

/// Coercivity of a GNEP: one `y` improves every player's cost simultaneously.
pub fn gnep_coercivity_verify(inst: &ProblemInstance, rho: f64, far_samples: usize, seed: u64) -> Result<UccReport> {
    let game = match (inst.kind, inst.game()) {
        (ProblemKind::Gnep, Some(g)) => g,
        _ => return Err(QeqError::InvalidArgument("instance is not a GNEP".into())),
    };
    verify_with(inst, WitnessRule::Players(game), rho, far_samples, seed)
}

/// Dispatches on the instance kind.
pub fn verify_native(inst: &ProblemInstance, rho: f64, far_samples: usize, seed: u64) -> Result<UccReport> {
    match inst.kind {
        ProblemKind::Qep => ucc_verify(inst, rho, far_samples, seed),
        ProblemKind::Qvi => qvi_ucc_verify(inst, rho, far_samples, seed),
        ProblemKind::Gnep => gnep_coercivity_verify(inst, rho, far_samples, seed),
    }
}

pub fn verify_with(
    inst: &ProblemInstance,
    rule: WitnessRule<'_>,
    rho: f64,
    far_samples: usize,
    seed: u64,
) -> Result<UccReport> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(QeqError::InvalidArgument(format!("rho must be positive, got {rho}")));
    }
    let h = inst.numerics.grid_h;
    let probe_radius = inst.numerics.probe_radius_for(rho).max(2.0 * rho);
    let cond1 = check_cond1(&inst.c, &inst.k, rho, probe_radius, h, far_samples, seed)?;

    let ball_region = inst.c.intersect_origin_ball(rho)?;
    let fixed = if ball_region.is_empty() {
        Vec::new()
    } else {
        fixed_point_set(&inst.k, &ball_region, h, inst.numerics.tol_feas)?.points
    };
    let mut cond2 = Vec::with_capacity(fixed.len());
    for z in fixed {
        cond2.push(cond2_scan(&inst.k, rule, z, rho, h)?);
    }
    let pass = cond1.pass && cond2.iter().all(|e| e.pass);
    Ok(UccReport {
        rho,
        pass,
        rule: rule.label().into(),
        cond1,
        cond2,
        probe_radius,
        grid_h: h,
    })
}

fn check_cond1(
    c: &ConvexRegion,
    k: &SetValuedMap,
    rho: f64,
    probe_radius: f64,
    h: f64,
    far_samples: usize,
    seed: u64,
) -> Result<Cond1> {
    let mut probes = SampleDomain::new(c.clone(), probe_radius, h).lattice()?.points;
    let mut rng = seeded(seed);
    let n = c.dim();
    let far = 10.0 * probe_radius;
    for _ in 0..far_samples {
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-far..=far)).collect();
        probes.push(c.project(&p)?);
    }
    let origin = vec![0.0; n];
    for (i, w) in probes.iter().enumerate() {
        let value = k.evaluate(w)?;
        // the open ball B_ρ meets K(w) iff dist(0, K(w)) < ρ
        if value.dist(&origin)? >= rho - PREMISE_TOL {
            return Ok(Cond1 {
                pass: false,
                coverage: "probed".into(),
                probed: i + 1,
                witness: Some(w.clone()),
            });
        }
    }
    Ok(Cond1 {
        pass: true,
        coverage: "probed".into(),
        probed: probes.len(),
        witness: None,
    })
}

/// Scans `x ∈ grid(K(z) ∩ B̄_ρ)` by decreasing norm for a witness
/// `y ∈ K(z)` with `‖y‖ < ‖x‖`.
pub fn cond2_scan(k: &SetValuedMap, rule: WitnessRule<'_>, z: Point, rho: f64, h: f64) -> Result<Cond2Entry> {
    let value = k.evaluate(&z)?;
    let region = value.intersect_origin_ball(rho)?;
    let mut xs = if region.is_empty() {
        Vec::new()
    } else {
        region.grid_points(h, rho)?
    };
    // candidate witnesses: the lattice points plus two off-lattice points of K(z)
    let mut ys = xs.clone();
    if let Ok(p) = value.project(&z) {
        ys.push(p);
    }
    if let Ok(p) = value.project(&vec![0.0; z.len()]) {
        ys.push(p);
    }
    let mut ys: Vec<(f64, Point)> = ys.into_iter().map(|y| (norm(&y), y)).collect();
    ys.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.lex_cmp(&b.1)));
    xs.sort_by(|a, b| norm(b).total_cmp(&norm(a)).then_with(|| a.lex_cmp(b)));

    let max_norm = xs.first().map(|x| norm(x)).unwrap_or(0.0);
    let mut rho_z = None;
    let mut violations = Vec::new();
    let mut witnesses = Vec::new();
    let mut scanned = 0;
    for x in &xs {
        let nx = norm(x);
        if rho_z.is_some() && nx + h < rho {
            break;
        }
        scanned += 1;
        let found = ys
            .iter()
            .take_while(|(ny, _)| *ny < nx - PREMISE_TOL)
            .find(|(_, y)| rule.accepts(x, y));
        match found {
            Some((_, y)) => witnesses.push((x.clone(), y.clone())),
            None => {
                if rho_z.is_none() {
                    rho_z = Some(nx + h);
                }
                if nx + h >= rho && violations.len() < MAX_VIOLATIONS {
                    violations.push(x.clone());
                }
            }
        }
    }
    let vacuous = xs.is_empty() || max_norm + h < rho;
    let pass = vacuous || rho_z.is_none_or(|r| r < rho);
    Ok(Cond2Entry {
        z,
        rho_z,
        vacuous,
        pass,
        violations,
        scanned,
        witnesses,
    })
}

/// Smallest `ρ` in `ρ0·2^k ≤ rho_max` at which [`verify_native`] passes.
pub fn find_coercive_radius(
    inst: &ProblemInstance,
    rho0: f64,
    rho_max: f64,
    far_samples: usize,
    seed: u64,
) -> Result<Option<UccReport>> {
    if !(rho0 > 0.0 && rho_max > 0.0) {
        return Err(QeqError::InvalidArgument("radii must be positive".into()));
    }
    let mut rho = rho0;
    while rho <= rho_max {
        let report = verify_native(inst, rho, far_samples, seed)?;
        if report.pass {
            return Ok(Some(report));
        }
        rho *= 2.0;
    }
    Ok(None)
}

/// A compact `Z` and a subset `W` for the compactness-type condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TzCandidate {
    pub z: ConvexRegion,
    pub w: ConvexRegion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TzCandidateResult {
    pub candidate: TzCandidate,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<Witness>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TzReport {
    pub pass: bool,
    pub candidates: Vec<TzCandidateResult>,
    /// Closedness of `{x ∈ Z : inf f(x, K(x) ∩ Z) ≥ 0}` is never checked.
    pub closedness_checked: bool,
}

impl TzReport {
    pub fn verdict(&self) -> PropertyVerdict {
        const NAME: &str = "tz_coercivity";
        let n = self.candidates.len();
        let note = "closedness condition not checked";
        match self.candidates.iter().find(|c| !c.pass) {
            Some(first) if !self.pass => PropertyVerdict::fail(NAME, n, first.failure.clone().expect("failed candidate")),
            _ => PropertyVerdict::pass(NAME, n, false),
        }
        .with_note(note)
    }
}

/// Boxes `Z = C ∩ [−M, M]^n`, `W = C ∩ [−M/2, M/2]^n` for `M = 1, 2, 4, …`.
pub fn doubling_candidates(c: &ConvexRegion, count: usize) -> Result<Vec<TzCandidate>> {
    let n = c.dim();
    let mut out = Vec::with_capacity(count);
    let mut m = 1.0;
    for _ in 0..count {
        let z = c.intersect(&ConvexRegion::boxed(vec![-m; n], vec![m; n])?)?;
        let w = c.intersect(&ConvexRegion::boxed(vec![-m / 2.0; n], vec![m / 2.0; n])?)?;
        out.push(TzCandidate { z, w });
        m *= 2.0;
    }
    Ok(out)
}

/// Passes iff some candidate satisfies on grids: `K(W) ⊆ Z`, `K(x) ∩ Z ≠ ∅`
/// on `Z`, and a descent point `y ∈ K(x) ∩ Z` with `f(x,y) < 0` for every
/// `x ∈ Z ∖ W`.
pub fn tz_coercivity_check(inst: &ProblemInstance, candidates: &[TzCandidate], seed: u64) -> Result<TzReport> {
    let h = inst.numerics.grid_h;
    let mut results = Vec::with_capacity(candidates.len());
    let mut rng = seeded(seed);
    for cand in candidates {
        if !cand.z.is_bounded() {
            return Err(QeqError::InvalidArgument("candidate Z must be bounded".into()));
        }
        let radius = crate::solver::check::enclosing_radius(&cand.z)?;
        let window = radius + h;
        let z_grid = SampleDomain::new(cand.z.clone(), window, h).lattice()?;
        let w_grid = SampleDomain::new(cand.w.clone(), window, h).lattice()?;
        for x in &w_grid.points {
            if cand.z.dist(x)? > h {
                return Err(QeqError::InvalidArgument("candidate W is not inside Z".into()));
            }
        }
        let failure = tz_candidate_failure(inst, cand, &z_grid.points, &w_grid.points, 10.0 * window, &mut rng)?;
        results.push(TzCandidateResult {
            candidate: cand.clone(),
            pass: failure.is_none(),
            failure,
        });
    }
    Ok(TzReport {
        pass: results.iter().any(|r| r.pass),
        candidates: results,
        closedness_checked: false,
    })
}

fn tz_candidate_failure(
    inst: &ProblemInstance,
    cand: &TzCandidate,
    z_grid: &[Point],
    w_grid: &[Point],
    far: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Option<Witness>> {
    use crate::properties::ValueMap;
    let tol = inst.numerics.tol_feas;
    // K(W) ⊆ Z
    for x in w_grid {
        let value = inst.k.evaluate(x)?;
        for y in inst.k.value_samples(x, far, rng)? {
            if cand.z.dist(&y)? > tol {
                return Ok(Some(Witness::Escape {
                    x: x.clone(),
                    y,
                    bounded: value.is_bounded(),
                }));
            }
        }
    }
    // K(x) ∩ Z ≠ ∅ on Z
    for x in z_grid {
        if inst.k.evaluate(x)?.intersect(&cand.z)?.is_empty() {
            return Ok(Some(Witness::EmptyValue { x: x.clone() }));
        }
    }
    // descent points on Z ∖ W
    let h = inst.numerics.grid_h;
    let bound = crate::solver::check::enclosing_radius(&cand.z)? + h;
    for x in z_grid {
        if cand.w.contains(x)? {
            continue;
        }
        let meet = inst.k.evaluate(x)?.intersect(&cand.z)?;
        let mut ys = meet.grid_points(h, bound)?;
        if let Ok(p) = meet.project(x) {
            ys.push(p);
        }
        let best = ys.iter().map(|y| inst.f.eval(x, y)).fold(f64::INFINITY, f64::min);
        if best >= -VIOLATION_TOL {
            return Ok(Some(Witness::NoDescent {
                x: x.clone(),
                best_value: best,
            }));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bifunction::QuadraticBifunction;
    use crate::instance::Numerics;
    use crate::linalg::Matrix;
    use crate::map::AffineClamp;

    fn tz(f: Bifunction) -> ProblemInstance {
        ProblemInstance::qep(
            "tz",
            ConvexRegion::interval(0.0, f64::INFINITY),
            SetValuedMap::constant(ConvexRegion::interval(1.0, f64::INFINITY)),
            f,
            Numerics::new(0.01),
        )
        .unwrap()
    }

    fn y_minus_x() -> Bifunction {
        QuadraticBifunction {
            c: vec![-1.0],
            d: vec![1.0],
            ..QuadraticBifunction::zero(1)
        }
        .into()
    }

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
    fn cond1_on_the_half_line_example() {
        let inst = tz(y_minus_x());
        let r = ucc_verify(&inst, 2.0, 100, 0).unwrap();
        assert!(r.cond1.pass);
        let r = ucc_verify(&inst, 0.5, 100, 0).unwrap();
        assert!(!r.cond1.pass && r.cond1.witness.is_some());
        assert!(!r.pass);
    }

    #[test]
    fn e3_passes_at_three_with_vacuous_annuli() {
        let r = ucc_verify(&e3(), 3.0, 100, 0).unwrap();
        assert!(r.pass);
        assert!(!r.cond2.is_empty());
        assert!(r.cond2.iter().all(|e| e.vacuous));
    }

    #[test]
    fn radius_search() {
        let e3 = e3();
        let found = find_coercive_radius(&e3, 1.0, 64.0, 100, 0).unwrap().unwrap();
        // at ρ = 1 the witness-free point 0.99 pushes ρ_z to 1
        assert_eq!(found.rho, 2.0);
        let r1 = ucc_verify(&e3, 1.0, 100, 0).unwrap();
        assert!(!r1.pass);
        let tz_found = find_coercive_radius(&tz(y_minus_x()), 1.0, 64.0, 100, 0).unwrap().unwrap();
        assert_eq!(tz_found.rho, 2.0);
        let empty = ProblemInstance::qep(
            "empty",
            ConvexRegion::interval(-1.0, 1.0),
            SetValuedMap::constant(ConvexRegion::empty(1)),
            y_minus_x(),
            Numerics::new(0.01),
        )
        .unwrap();
        assert!(find_coercive_radius(&empty, 1.0, 64.0, 100, 0).unwrap().is_none());
    }

    #[test]
    fn violations_recheck_as_witness_free() {
        let inst = e3();
        let r = ucc_verify(&inst, 1.0, 10, 0).unwrap();
        let rule = WitnessRule::Bifunction(&inst.f);
        for e in &r.cond2 {
            let value = inst.k.evaluate(&e.z).unwrap();
            let ys = value.grid_points(0.01, 1.0).unwrap();
            for x in &e.violations {
                assert!(ys.iter().filter(|y| norm(y) < norm(x) - 1e-12).all(|y| !rule.accepts(x, y)));
            }
        }
    }

    #[test]
    fn tz_sweep_fails_on_the_half_line_example() {
        let inst = tz(y_minus_x());
        let cands = doubling_candidates(&inst.c, 20).unwrap();
        let rep = tz_coercivity_check(&inst, &cands, 0).unwrap();
        assert!(!rep.pass);
        assert!(rep.candidates.iter().all(|c| matches!(c.failure, Some(Witness::Escape { .. }))));
        assert!(rep.verdict().failed());
    }

    #[test]
    fn tz_constant_compact_map_passes() {
        let c = ConvexRegion::interval(-1.0, 1.0);
        let inst = ProblemInstance::qep(
            "const",
            c.clone(),
            SetValuedMap::constant(c.clone()),
            y_minus_x(),
            Numerics::new(0.01),
        )
        .unwrap();
        let rep = tz_coercivity_check(&inst, &[TzCandidate { z: c.clone(), w: c }], 0).unwrap();
        assert!(rep.pass);
        assert!(!rep.closedness_checked);
    }
}
