//! Sampled checks of generalized convexity and monotonicity, and grid
//! falsifiers for lower semicontinuity and closed graphs.
//!
//! Every check is a budgeted search for a counterexample. A pass only means
//! that none was found; `certifying` is therefore always `false`.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bifunction::Bifunction;
use crate::error::{QeqError, Result};
use crate::linalg::{dist, Point};
use crate::map::{co_sampler, SetValuedMap};
use crate::region::ConvexRegion;

/// Interior segment parameters `t ∈ {0.1, …, 0.9}`.
pub const SEGMENT_T: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
/// Tolerance for reporting a violation.
pub const VIOLATION_TOL: f64 = 1e-9;
/// Tolerance for accepting a premise.
pub const PREMISE_TOL: f64 = 1e-12;
/// Default slope of the lower-semicontinuity falsifier.
pub const DEFAULT_KAPPA: f64 = 10.0;
/// Largest sample pool drawn from a lattice.
pub const POOL_MAX: usize = 20_000;
/// Refinement levels used to confirm a limit (`s = 1, 1/2, …, 1/64`).
const LIMIT_LEVELS: usize = 7;

/// A counterexample, with everything needed to re-evaluate it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// `f(x, t·y1 + (1−t)·y2)` compared with `max(f(x,y1), f(x,y2))`.
    Segment {
        x: Point,
        y1: Point,
        y2: Point,
        t: f64,
        value: f64,
        bound: f64,
    },
    Pair {
        x: Point,
        y: Point,
        fxy: f64,
        fyx: f64,
    },
    /// A hull point `x` of `points` with `min_i f(points_i, x) > 0`.
    Simplex {
        points: Vec<Point>,
        weights: Vec<f64>,
        x: Point,
        min_value: f64,
    },
    UpperSign {
        x: Point,
        y: Point,
        t_grid: usize,
        premise_max: f64,
        value: f64,
    },
    /// `dist(y0, K(x0 + s(x − x0))) > κ·s·‖x − x0‖ + 2h` at every refinement level.
    Lsc {
        x0: Point,
        y0: Point,
        x: Point,
        kappa: f64,
        dists_along: Vec<f64>,
    },
    /// `dist(y_bar, K(x_bar + s·direction)) ≤ h` for all refinement levels
    /// while `dist(y_bar, K(x_bar)) > 2h`.
    ClosedGraph {
        x_bar: Point,
        y_bar: Point,
        direction: Point,
        dist_at_limit: f64,
        dists_along: Vec<f64>,
    },
    Diagonal {
        x: Point,
        value: f64,
    },
    /// `f(x + s·direction, y) − f(x, y)` stays positive as `s → 0`.
    Usc {
        x: Point,
        y: Point,
        direction: Point,
        jumps: Vec<f64>,
    },
    /// A point of the set whose lattice neighbours all lie outside it.
    Isolated {
        x: Point,
        value: f64,
    },
    Implication {
        x: Point,
        y: Point,
        z: Point,
        t: f64,
        fxy: f64,
        fxz: f64,
        value: f64,
    },
    EmptyValue {
        x: Point,
    },
    /// A point `y ∈ K(x)` outside a set that should contain `K(x)`.
    Escape {
        x: Point,
        y: Point,
        bounded: bool,
    },
    /// No `y` with `f(x,y) < 0` among the searched points.
    NoDescent {
        x: Point,
        best_value: f64,
    },
    /// Grid fixed points accumulating at a point that is far from `K(x_bar)`.
    FixedSetLimit {
        x_bar: Point,
        dist_at_limit: f64,
        direction: Point,
        dists_along: Vec<f64>,
    },
    NonConvexValue {
        x: Point,
        y1: Point,
        y2: Point,
        t: f64,
        value: f64,
    },
    OwnBlock {
        player: usize,
        eigenvalue: f64,
    },
}

impl Witness {
    /// Re-evaluates a bifunction witness under `property`. `None` when the
    /// witness does not involve `f` alone.
    pub fn recheck(&self, property: &str, f: &Bifunction) -> Option<bool> {
        let tol = VIOLATION_TOL;
        match self {
            Witness::Segment { x, y1, y2, t, .. } => {
                let yt = y1.lerp(y2, *t);
                let h1 = f.eval(x, y1);
                let h2 = f.eval(x, y2);
                let v = f.eval(x, &yt);
                let m = h1.max(h2);
                Some(match property {
                    "semistrict_quasiconvex_y" => v > m + tol || ((h1 - h2).abs() > tol && v >= m - PREMISE_TOL),
                    _ => v > m + tol,
                })
            }
            Witness::Pair { x, y, .. } => {
                let fxy = f.eval(x, y);
                let fyx = f.eval(y, x);
                Some(match property {
                    "pseudo_monotone" => fxy >= -PREMISE_TOL && fyx > tol,
                    _ => fxy > tol && fyx > tol,
                })
            }
            Witness::Simplex { points, x, .. } => {
                let m = points.iter().map(|p| f.eval(p, x)).fold(f64::INFINITY, f64::min);
                Some(m > tol)
            }
            Witness::UpperSign { x, y, t_grid, .. } => {
                let premise = (1..=*t_grid).all(|k| {
                    let t = k as f64 / (*t_grid as f64 + 1.0);
                    f.eval(&x.lerp(y, t), x) <= PREMISE_TOL
                });
                Some(premise && f.eval(x, y) < -tol)
            }
            Witness::Diagonal { x, .. } => {
                let v = f.eval(x, x);
                Some(match property {
                    "diagonal_nonnegative" => v < -tol,
                    _ => v.abs() > tol,
                })
            }
            Witness::Usc { x, y, direction, .. } => {
                let base = f.eval(x, y);
                let jumps: Vec<f64> = (0..LIMIT_LEVELS)
                    .map(|k| {
                        let s = 0.5f64.powi(k as i32);
                        let xs: Vec<f64> = x.iter().zip(direction.iter()).map(|(a, d)| a + s * d).collect();
                        f.eval(&xs, y) - base
                    })
                    .collect();
                Some(usc_violated(&jumps))
            }
            Witness::Implication { x, y, z, t, .. } => {
                let w = y.lerp(z, *t);
                Some(f.eval(x, y) <= PREMISE_TOL && f.eval(x, z) < -tol && f.eval(x, &w) >= 0.0)
            }
            _ => None,
        }
    }

    /// Re-evaluates a map witness. `None` for witnesses of other kinds.
    pub fn recheck_map(&self, k: &dyn ValueMap, h: f64) -> Result<Option<bool>> {
        Ok(match self {
            Witness::Lsc { x0, y0, x, kappa, .. } => Some(lsc_levels(k, x0, y0, x, *kappa, h)?.is_some()),
            Witness::ClosedGraph {
                x_bar,
                y_bar,
                direction,
                ..
            } => {
                let far = k.dist_to_value(x_bar, y_bar)? > 2.0 * h;
                let mut near = true;
                for lvl in 0..LIMIT_LEVELS {
                    let s = 0.5f64.powi(lvl as i32);
                    let xs: Vec<f64> = x_bar.iter().zip(direction.iter()).map(|(a, d)| a + s * d).collect();
                    near &= k.dist_to_value(&xs, y_bar)? <= h;
                }
                Some(far && near)
            }
            Witness::EmptyValue { x } => Some(k.is_empty_at(x)?),
            _ => None,
        })
    }
}

fn usc_violated(jumps: &[f64]) -> bool {
    let min = jumps.iter().copied().fold(f64::INFINITY, f64::min);
    min > VIOLATION_TOL && jumps[jumps.len() - 1] >= 0.5 * jumps[0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Pass { budget_exhausted: bool },
    Fail { witness: Witness },
}

/// Result of one budgeted check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyVerdict {
    pub property: String,
    #[serde(flatten)]
    pub outcome: Outcome,
    pub samples_used: usize,
    /// A pass never certifies a property quantified over a continuum.
    pub certifying: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl PropertyVerdict {
    pub fn pass(property: &str, samples_used: usize, budget_exhausted: bool) -> Self {
        PropertyVerdict {
            property: property.into(),
            outcome: Outcome::Pass { budget_exhausted },
            samples_used,
            certifying: false,
            note: None,
        }
    }

    pub fn fail(property: &str, samples_used: usize, witness: Witness) -> Self {
        PropertyVerdict {
            property: property.into(),
            outcome: Outcome::Fail { witness },
            samples_used,
            certifying: false,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        matches!(self.outcome, Outcome::Pass { .. })
    }

    pub fn failed(&self) -> bool {
        !self.passed()
    }

    pub fn witness(&self) -> Option<&Witness> {
        match &self.outcome {
            Outcome::Fail { witness } => Some(witness),
            Outcome::Pass { .. } => None,
        }
    }
}

/// The lattice points of `region ∩ B̄_window` at spacing `h` that samplers draw from.
#[derive(Clone, Debug)]
pub struct SampleDomain {
    pub region: ConvexRegion,
    pub window: f64,
    pub h: f64,
}

impl SampleDomain {
    pub fn new(region: ConvexRegion, window: f64, h: f64) -> Self {
        SampleDomain { region, window, h }
    }

    /// Lattice points (coarsened by doubling `h` past [`POOL_MAX`]) and the
    /// spacing actually used. A region too thin for the lattice contributes the
    /// projection of the origin.
    pub fn lattice(&self) -> Result<Lattice> {
        let mut h = self.h;
        while self.region.grid_count_bound(h, self.window) > 4.0 * POOL_MAX as f64 {
            h *= 2.0;
        }
        loop {
            match self.region.grid_points(h, self.window) {
                Ok(pts) if pts.len() <= POOL_MAX => {
                    let pts = if pts.is_empty() && !self.region.is_empty() {
                        vec![self.region.project(&Point::zeros(self.region.dim()))?]
                    } else {
                        pts
                    };
                    return Ok(Lattice::new(pts, h));
                }
                Ok(_) | Err(QeqError::ExplosionGuard { .. }) => h *= 2.0,
                Err(e) => return Err(e),
            }
        }
    }
}

/// A finite set of lattice points with neighbourhood queries.
#[derive(Clone, Debug)]
pub struct Lattice {
    pub points: Vec<Point>,
    pub h: f64,
    index: HashSet<Vec<i64>>,
}

impl Lattice {
    pub fn new(points: Vec<Point>, h: f64) -> Self {
        let index = points.iter().map(|p| key(p, h)).collect();
        Lattice { points, h, index }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.index.contains(&key(p, self.h))
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Offsets `k·h` with `0 < ‖k‖ ≤ steps` (integer `k`).
    pub fn offsets(&self, dim: usize, steps: i64) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        let mut k = vec![-steps; dim];
        loop {
            let n2: i64 = k.iter().map(|v| v * v).sum();
            if n2 > 0 && n2 <= steps * steps {
                out.push(k.iter().map(|v| *v as f64 * self.h).collect());
            }
            let mut d = dim;
            loop {
                if d == 0 {
                    return out;
                }
                d -= 1;
                if k[d] < steps {
                    k[d] += 1;
                    break;
                }
                k[d] = -steps;
            }
        }
    }

    /// Members of the lattice within `steps` lattice steps of `p`.
    pub fn neighbors(&self, p: &[f64], steps: i64) -> Vec<Point> {
        self.offsets(p.len(), steps)
            .into_iter()
            .map(|o| Point(p.iter().zip(&o).map(|(a, b)| a + b).collect()))
            .filter(|q| self.contains(q))
            .collect()
    }

    /// Whether every point of the `3^n − 1` neighbourhood is a member.
    pub fn is_interior(&self, p: &[f64]) -> bool {
        let mut k = vec![-1i64; p.len()];
        loop {
            if k.iter().any(|v| *v != 0) {
                let q: Vec<f64> = p.iter().zip(&k).map(|(a, b)| a + *b as f64 * self.h).collect();
                if !self.contains(&q) {
                    return false;
                }
            }
            let mut d = p.len();
            loop {
                if d == 0 {
                    return true;
                }
                d -= 1;
                if k[d] < 1 {
                    k[d] += 1;
                    break;
                }
                k[d] = -1;
            }
        }
    }

    /// Up to `budget` members: all of them in order, or a seeded subsample.
    pub fn subsample(&self, budget: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
        if self.points.len() <= budget {
            return self.points.clone();
        }
        let mut idx: Vec<usize> = (0..budget).map(|_| rng.gen_range(0..self.points.len())).collect();
        idx.sort_unstable();
        idx.dedup();
        idx.into_iter().map(|i| self.points[i].clone()).collect()
    }
}

fn key(p: &[f64], h: f64) -> Vec<i64> {
    p.iter().map(|v| (v / h).round() as i64).collect()
}

pub(crate) fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn pick<'a>(pool: &'a [Point], rng: &mut ChaCha8Rng) -> &'a Point {
    &pool[rng.gen_range(0..pool.len())]
}

fn pool_of(domain: &SampleDomain) -> Result<Vec<Point>> {
    let lat = domain.lattice()?;
    if lat.is_empty() {
        return Err(QeqError::EmptyRegion);
    }
    Ok(lat.points)
}

/// Quasiconvexity of `y ↦ f(x,y)`: `f(x, y_t) ≤ max(f(x,y1), f(x,y2)) + 1e-9`.
pub fn check_quasiconvex_y(f: &Bifunction, domain: &SampleDomain, budget: usize, seed: u64) -> Result<PropertyVerdict> {
    segment_check("quasiconvex_y", f, domain, budget, seed, false)
}

/// Semistrict quasiconvexity of `y ↦ f(x,y)`: quasiconvex, and the segment
/// value is strictly below the maximum whenever the endpoint values differ.
pub fn check_semistrict_quasiconvex_y(
    f: &Bifunction,
    domain: &SampleDomain,
    budget: usize,
    seed: u64,
) -> Result<PropertyVerdict> {
    segment_check("semistrict_quasiconvex_y", f, domain, budget, seed, true)
}

fn segment_check(
    name: &str,
    f: &Bifunction,
    domain: &SampleDomain,
    budget: usize,
    seed: u64,
    strict: bool,
) -> Result<PropertyVerdict> {
    let pool = pool_of(domain)?;
    let mut rng = seeded(seed);
    for s in 0..budget {
        let x = pick(&pool, &mut rng);
        let y1 = pick(&pool, &mut rng);
        let y2 = pick(&pool, &mut rng);
        let h1 = f.eval(x, y1);
        let h2 = f.eval(x, y2);
        let m = h1.max(h2);
        for &t in &SEGMENT_T {
            let yt = y1.lerp(y2, t);
            let v = f.eval(x, &yt);
            let bad = v > m + VIOLATION_TOL || (strict && (h1 - h2).abs() > VIOLATION_TOL && v >= m - PREMISE_TOL);
            if bad {
                return Ok(PropertyVerdict::fail(
                    name,
                    s + 1,
                    Witness::Segment {
                        x: x.clone(),
                        y1: y1.clone(),
                        y2: y2.clone(),
                        t,
                        value: v,
                        bound: m,
                    },
                ));
            }
        }
    }
    Ok(PropertyVerdict::pass(name, budget, true))
}

/// Pseudo-monotonicity: `f(x,y) ≥ 0 ⇒ f(y,x) ≤ 0`.
pub fn check_pseudo_monotone(f: &Bifunction, domain: &SampleDomain, budget: usize, seed: u64) -> Result<PropertyVerdict> {
    pair_check("pseudo_monotone", f, domain, budget, seed, |fxy, fyx| {
        fxy >= -PREMISE_TOL && fyx > VIOLATION_TOL
    })
}

/// Quasi-monotonicity: `f(x,y) > 0 ⇒ f(y,x) ≤ 0`.
pub fn check_quasi_monotone(f: &Bifunction, domain: &SampleDomain, budget: usize, seed: u64) -> Result<PropertyVerdict> {
    pair_check("quasi_monotone", f, domain, budget, seed, |fxy, fyx| {
        fxy > VIOLATION_TOL && fyx > VIOLATION_TOL
    })
}

fn pair_check(
    name: &str,
    f: &Bifunction,
    domain: &SampleDomain,
    budget: usize,
    seed: u64,
    bad: impl Fn(f64, f64) -> bool,
) -> Result<PropertyVerdict> {
    let pool = pool_of(domain)?;
    let mut rng = seeded(seed);
    for s in 0..budget {
        let x = pick(&pool, &mut rng);
        let y = pick(&pool, &mut rng);
        let fxy = f.eval(x, y);
        let fyx = f.eval(y, x);
        if bad(fxy, fyx) {
            return Ok(PropertyVerdict::fail(
                name,
                s + 1,
                Witness::Pair {
                    x: x.clone(),
                    y: y.clone(),
                    fxy,
                    fyx,
                },
            ));
        }
    }
    Ok(PropertyVerdict::pass(name, budget, true))
}

/// Proper quasi-monotonicity: for `x ∈ co{x_1..x_m}`, `min_i f(x_i, x) ≤ 0`.
pub fn check_properly_quasi_monotone(
    f: &Bifunction,
    domain: &SampleDomain,
    m_max: usize,
    budget: usize,
    seed: u64,
) -> Result<PropertyVerdict> {
    const NAME: &str = "properly_quasi_monotone";
    if m_max < 2 {
        return Err(QeqError::InvalidArgument("m_max must be at least 2".into()));
    }
    let pool = pool_of(domain)?;
    let mut rng = seeded(seed);
    for s in 0..budget {
        let m = rng.gen_range(2..=m_max);
        let pts: Vec<Point> = (0..m).map(|_| pick(&pool, &mut rng).clone()).collect();
        let hull_seed = rng.gen::<u64>();
        let sample = co_sampler(&pts, 1, hull_seed)?.remove(0);
        let min_value = pts.iter().map(|p| f.eval(p, &sample.point)).fold(f64::INFINITY, f64::min);
        if min_value > VIOLATION_TOL {
            return Ok(PropertyVerdict::fail(
                NAME,
                s + 1,
                Witness::Simplex {
                    points: pts,
                    weights: sample.weights,
                    x: sample.point,
                    min_value,
                },
            ));
        }
    }
    Ok(PropertyVerdict::pass(NAME, budget, true))
}

/// Upper sign property: `f(x_t, x) ≤ 0` for `x_t = t x + (1−t) y` on the
/// interior grid `t = k/(T+1)` implies `f(x,y) ≥ 0`.
pub fn check_upper_sign(
    f: &Bifunction,
    domain: &SampleDomain,
    budget: usize,
    t_grid: usize,
    seed: u64,
) -> Result<PropertyVerdict> {
    const NAME: &str = "upper_sign";
    let pool = pool_of(domain)?;
    let mut rng = seeded(seed);
    for s in 0..budget {
        let x = pick(&pool, &mut rng);
        let y = pick(&pool, &mut rng);
        let mut premise_max = f64::NEG_INFINITY;
        let mut premise = true;
        for k in 1..=t_grid {
            let t = k as f64 / (t_grid as f64 + 1.0);
            let v = f.eval(&x.lerp(y, t), x);
            premise_max = premise_max.max(v);
            if v > PREMISE_TOL {
                premise = false;
                break;
            }
        }
        if !premise {
            continue;
        }
        let value = f.eval(x, y);
        if value < -VIOLATION_TOL {
            return Ok(PropertyVerdict::fail(
                NAME,
                s + 1,
                Witness::UpperSign {
                    x: x.clone(),
                    y: y.clone(),
                    t_grid,
                    premise_max,
                    value,
                },
            ));
        }
    }
    Ok(PropertyVerdict::pass(NAME, budget, true))
}

/// Checks the sign of `f(x,x)` on the given points: `|f(x,x)| ≤ 1e-9` when
/// `vanish`, otherwise `f(x,x) ≥ −1e-9`.
pub fn check_diagonal(f: &Bifunction, points: &[Point], vanish: bool) -> PropertyVerdict {
    let name = if vanish { "diagonal_vanishes" } else { "diagonal_nonnegative" };
    for (s, x) in points.iter().enumerate() {
        let v = f.eval(x, x);
        let bad = if vanish { v.abs() > VIOLATION_TOL } else { v < -VIOLATION_TOL };
        if bad {
            return PropertyVerdict::fail(name, s + 1, Witness::Diagonal { x: x.clone(), value: v });
        }
    }
    PropertyVerdict::pass(name, points.len(), true)
}

/// Upper semicontinuity of `x ↦ f(x,y)`: flags a jump `f(x + s d, y) − f(x, y)`
/// that stays positive and does not decay as `s = 1, 1/2, …, 1/64`.
pub fn check_usc_first_argument(
    f: &Bifunction,
    domain: &SampleDomain,
    budget: usize,
    seed: u64,
) -> Result<PropertyVerdict> {
    const NAME: &str = "usc_first_argument";
    let lat = domain.lattice()?;
    if lat.is_empty() {
        return Err(QeqError::EmptyRegion);
    }
    let offsets = lat.offsets(domain.region.dim(), 1);
    let mut rng = seeded(seed);
    let mut used = 0;
    for x in lat.subsample(budget, &mut rng) {
        let y = pick(&lat.points, &mut rng).clone();
        let base = f.eval(&x, &y);
        for d in &offsets {
            used += 1;
            let jumps: Vec<f64> = (0..LIMIT_LEVELS)
                .map(|k| {
                    let s = 0.5f64.powi(k as i32);
                    let xs: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + s * b).collect();
                    f.eval(&xs, &y) - base
                })
                .collect();
            if usc_violated(&jumps) {
                return Ok(PropertyVerdict::fail(
                    NAME,
                    used,
                    Witness::Usc {
                        x,
                        y,
                        direction: Point(d.clone()),
                        jumps,
                    },
                ));
            }
        }
    }
    Ok(PropertyVerdict::pass(NAME, used, true))
}

/// Raw implication `f(x,y) ≤ 0 ∧ f(x,z) < 0 ⇒ f(x, t y + (1−t) z) < 0` for
/// `x` in `xs` and `y, z` drawn from the lattice of `K(x) ∩ B̄_window`.
pub fn check_implication(
    f: &Bifunction,
    k: &SetValuedMap,
    xs: &[Point],
    window: f64,
    h: f64,
    budget: usize,
    seed: u64,
) -> Result<PropertyVerdict> {
    const NAME: &str = "implication";
    let mut rng = seeded(seed);
    let per_x = (budget / xs.len().max(1)).max(1);
    let mut used = 0;
    for x in xs {
        let value = k.evaluate(x)?;
        let ys = SampleDomain::new(value, window, h).lattice()?.points;
        if ys.len() < 2 {
            continue;
        }
        for _ in 0..per_x {
            used += 1;
            let y = pick(&ys, &mut rng);
            let z = pick(&ys, &mut rng);
            let fxy = f.eval(x, y);
            let fxz = f.eval(x, z);
            if !(fxy <= PREMISE_TOL && fxz < -VIOLATION_TOL) {
                continue;
            }
            for &t in &SEGMENT_T {
                let w = y.lerp(z, t);
                let v = f.eval(x, &w);
                if v >= 0.0 {
                    return Ok(PropertyVerdict::fail(
                        NAME,
                        used,
                        Witness::Implication {
                            x: x.clone(),
                            y: y.clone(),
                            z: z.clone(),
                            t,
                            fxy,
                            fxz,
                            value: v,
                        },
                    ));
                }
            }
        }
    }
    Ok(PropertyVerdict::pass(NAME, used, true))
}

/// Anything that can report distances to its values: parametric maps and
/// finite lattice approximations of derived maps.
pub trait ValueMap {
    fn dist_to_value(&self, x: &[f64], y: &[f64]) -> Result<f64>;
    /// A few points of the value at `x` (empty when the value is empty).
    fn value_samples(&self, x: &[f64], window: f64, rng: &mut ChaCha8Rng) -> Result<Vec<Point>>;
    fn is_empty_at(&self, x: &[f64]) -> Result<bool>;
    /// Lattice approximations compare only adjacent points and skip empty
    /// neighbours, because the discretised values jump by a lattice step.
    fn is_lattice_approximation(&self) -> bool {
        false
    }
}

impl ValueMap for SetValuedMap {
    fn dist_to_value(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        SetValuedMap::dist_to_value(self, x, y)
    }

    fn value_samples(&self, x: &[f64], window: f64, rng: &mut ChaCha8Rng) -> Result<Vec<Point>> {
        let value = self.evaluate(x)?;
        if value.is_empty() {
            return Ok(Vec::new());
        }
        let m = value.dim();
        let mut out = Vec::new();
        for mask in 0..(1usize << m) {
            let corner: Vec<f64> = (0..m).map(|i| if mask >> i & 1 == 1 { window } else { -window }).collect();
            out.push(value.project(&corner)?);
        }
        if x.len() == m {
            out.push(value.project(x)?);
        }
        for _ in 0..3 {
            let p: Vec<f64> = (0..m).map(|_| rng.gen_range(-window..=window)).collect();
            out.push(value.project(&p)?);
        }
        out.sort_by(|a, b| a.lex_cmp(b));
        out.dedup_by(|a, b| dist(a, b) < 1e-12);
        Ok(out)
    }

    fn is_empty_at(&self, x: &[f64]) -> Result<bool> {
        Ok(self.evaluate(x)?.is_empty())
    }
}

/// A set-valued map known only through finite lattice values.
pub struct LatticeMap<'a> {
    values: Box<dyn Fn(&[f64]) -> Result<Vec<Point>> + 'a>,
    cache: std::cell::RefCell<std::collections::HashMap<Vec<u64>, Vec<Point>>>,
}

impl<'a> LatticeMap<'a> {
    pub fn new(values: impl Fn(&[f64]) -> Result<Vec<Point>> + 'a) -> Self {
        LatticeMap {
            values: Box::new(values),
            cache: Default::default(),
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<Vec<Point>> {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        if let Some(v) = self.cache.borrow().get(&key) {
            return Ok(v.clone());
        }
        let v = (self.values)(x)?;
        self.cache.borrow_mut().insert(key, v.clone());
        Ok(v)
    }
}

impl ValueMap for LatticeMap<'_> {
    fn dist_to_value(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(self
            .value(x)?
            .iter()
            .map(|p| dist(p, y))
            .fold(f64::INFINITY, f64::min))
    }

    fn value_samples(&self, x: &[f64], _window: f64, rng: &mut ChaCha8Rng) -> Result<Vec<Point>> {
        let v = self.value(x)?;
        if v.len() <= 6 {
            return Ok(v);
        }
        // extremes of the finite value plus a few random members
        let mut out = vec![v[0].clone(), v[v.len() - 1].clone()];
        for _ in 0..4 {
            out.push(pick(&v, rng).clone());
        }
        Ok(out)
    }

    fn is_empty_at(&self, x: &[f64]) -> Result<bool> {
        Ok(self.value(x)?.is_empty())
    }

    fn is_lattice_approximation(&self) -> bool {
        true
    }
}

/// Distances from `y0` to `K` along `x0 + s(x − x0)`, `s = 1, …, 1/64`, when
/// every one exceeds `κ·s·‖x − x0‖ + 2h`; `None` once the value comes close
/// (or, for lattice approximations, is empty).
fn lsc_levels(k: &dyn ValueMap, x0: &[f64], y0: &[f64], x: &[f64], kappa: f64, h: f64) -> Result<Option<Vec<f64>>> {
    let step = dist(x, x0);
    let mut along = Vec::with_capacity(LIMIT_LEVELS);
    for lvl in 0..LIMIT_LEVELS {
        let s = 0.5f64.powi(lvl as i32);
        let xs: Vec<f64> = x0.iter().zip(x).map(|(a, b)| a + s * (b - a)).collect();
        if k.is_lattice_approximation() && k.is_empty_at(&xs)? {
            return Ok(None);
        }
        let d = k.dist_to_value(&xs, y0)?;
        if d <= kappa * s * step + 2.0 * h {
            return Ok(None);
        }
        along.push(d);
    }
    Ok(Some(along))
}

/// Lower-semicontinuity falsifier on a lattice of inputs.
///
/// For each examined `x0` and sampled `y0 ∈ K(x0)`, a lattice neighbour `x`
/// with `dist(y0, K(x)) > κ‖x − x0‖ + 2h` is followed towards `x0`; the map is
/// refuted only if the value stays that far at every refinement level.
pub fn falsify_lsc_on(
    k: &dyn ValueMap,
    inputs: &Lattice,
    kappa: f64,
    window: f64,
    budget: usize,
    seed: u64,
) -> Result<PropertyVerdict> {
    const NAME: &str = "lsc";
    let mut rng = seeded(seed);
    let h = inputs.h;
    let steps = if k.is_lattice_approximation() { 1 } else { 2 };
    let mut used = 0;
    for x0 in inputs.subsample(budget, &mut rng) {
        let ys = k.value_samples(&x0, window, &mut rng)?;
        if ys.is_empty() {
            continue;
        }
        used += 1;
        for x in inputs.neighbors(&x0, steps) {
            if k.is_lattice_approximation() && k.is_empty_at(&x)? {
                continue;
            }
            for y0 in &ys {
                if k.dist_to_value(&x, y0)? <= kappa * dist(&x, &x0) + 2.0 * h {
                    continue;
                }
                if let Some(dists_along) = lsc_levels(k, &x0, y0, &x, kappa, h)? {
                    return Ok(PropertyVerdict::fail(
                        NAME,
                        used,
                        Witness::Lsc {
                            x0: x0.clone(),
                            y0: y0.clone(),
                            x,
                            kappa,
                            dists_along,
                        },
                    ));
                }
            }
        }
    }
    Ok(PropertyVerdict::pass(NAME, used, true))
}

/// Lower-semicontinuity falsifier on the lattice of `domain`.
pub fn falsify_lsc(k: &dyn ValueMap, domain: &SampleDomain, kappa: f64, budget: usize, seed: u64) -> Result<PropertyVerdict> {
    let lat = domain.lattice()?;
    falsify_lsc_on(k, &lat, kappa, domain.window, budget, seed)
}

/// Closed-graph falsifier.
///
/// For a lattice point `x̄` and a neighbour `x̄ + d`, points `ȳ` of `K(x̄ + d)`
/// with `dist(ȳ, K(x̄)) > 2h` are followed along `x̄ + s d`, `s = 1, …, 1/64`;
/// if `ȳ` stays within `h` of every `K(x̄ + s d)` the graph has a limit point
/// outside itself.
pub fn falsify_closed_graph(k: &SetValuedMap, domain: &SampleDomain, budget: usize, seed: u64) -> Result<PropertyVerdict> {
    const NAME: &str = "closed_graph";
    let lat = domain.lattice()?;
    let h = lat.h;
    let mut rng = seeded(seed);
    let mut used = 0;
    for x_bar in lat.subsample(budget, &mut rng) {
        used += 1;
        for nb in lat.neighbors(&x_bar, 2) {
            let d: Vec<f64> = nb.iter().zip(x_bar.iter()).map(|(a, b)| a - b).collect();
            for y_bar in ValueMap::value_samples(k, &nb, domain.window, &mut rng)? {
                let at_limit = k.dist_to_value(&x_bar, &y_bar)?;
                if at_limit <= 2.0 * h {
                    continue;
                }
                let mut along = Vec::with_capacity(LIMIT_LEVELS);
                for lvl in 0..LIMIT_LEVELS {
                    let s = 0.5f64.powi(lvl as i32);
                    let xs: Vec<f64> = x_bar.iter().zip(&d).map(|(a, b)| a + s * b).collect();
                    let dd = k.dist_to_value(&xs, &y_bar)?;
                    along.push(dd);
                    if dd > h {
                        break;
                    }
                }
                if along.len() == LIMIT_LEVELS && along.iter().all(|v| *v <= h) {
                    return Ok(PropertyVerdict::fail(
                        NAME,
                        used,
                        Witness::ClosedGraph {
                            x_bar: x_bar.clone(),
                            y_bar,
                            direction: Point(d),
                            dist_at_limit: at_limit,
                            dists_along: along,
                        },
                    ));
                }
            }
        }
    }
    Ok(PropertyVerdict::pass(NAME, used, true))
}

/// Non-empty values of `K` on the lattice of `domain`, plus seeded far samples.
pub fn check_nonempty_values(k: &SetValuedMap, domain: &SampleDomain, budget: usize, seed: u64) -> Result<PropertyVerdict> {
    const NAME: &str = "nonempty_values";
    let lat = domain.lattice()?;
    let mut rng = seeded(seed);
    let xs = lat.subsample(budget, &mut rng);
    for (s, x) in xs.iter().enumerate() {
        if k.evaluate(x)?.is_empty() {
            return Ok(PropertyVerdict::fail(NAME, s + 1, Witness::EmptyValue { x: x.clone() }));
        }
    }
    Ok(PropertyVerdict::pass(NAME, xs.len(), true))
}

/// Closedness probe of `fix(K)`: a point clearly outside `fix(K)` that is the
/// limit of grid-consistent fixed points `x̄ + s d`, `s = 1, …, 1/64`.
pub fn falsify_fixed_set_closed(
    k: &SetValuedMap,
    domain: &SampleDomain,
    kappa: f64,
    tol: f64,
    budget: usize,
    seed: u64,
) -> Result<PropertyVerdict> {
    const NAME: &str = "fixed_set_closed";
    let lat = domain.lattice()?;
    let h = lat.h;
    let mut rng = seeded(seed);
    let mut used = 0;
    for x_bar in lat.subsample(budget, &mut rng) {
        let at_limit = k.dist_to_value(&x_bar, &x_bar)?;
        if at_limit <= kappa * h + h {
            continue;
        }
        used += 1;
        for nb in lat.neighbors(&x_bar, 1) {
            let d: Vec<f64> = nb.iter().zip(x_bar.iter()).map(|(a, b)| a - b).collect();
            let mut along = Vec::with_capacity(LIMIT_LEVELS);
            for lvl in 0..LIMIT_LEVELS {
                let s = 0.5f64.powi(lvl as i32);
                let xs: Vec<f64> = x_bar.iter().zip(&d).map(|(a, b)| a + s * b).collect();
                let dd = k.dist_to_value(&xs, &xs)?;
                along.push(dd);
                if dd > tol {
                    break;
                }
            }
            if along.len() == LIMIT_LEVELS && along.iter().all(|v| *v <= tol) {
                return Ok(PropertyVerdict::fail(
                    NAME,
                    used,
                    Witness::FixedSetLimit {
                        x_bar,
                        dist_at_limit: at_limit,
                        direction: Point(d),
                        dists_along: along,
                    },
                ));
            }
        }
    }
    Ok(PropertyVerdict::pass(NAME, used, true))
}

/// Openness falsifier for a set given by membership on a lattice: reports an
/// interior lattice point of the set whose neighbours are all outside it.
/// Boundary points of the lattice (truncated neighbourhoods) are skipped.
pub fn falsify_open_set(
    lattice: &Lattice,
    member: impl Fn(&Point) -> Result<(bool, f64)>,
    name: &str,
) -> Result<PropertyVerdict> {
    let mut used = 0;
    let mut memo = std::collections::HashMap::new();
    let mut check = |p: &Point| -> Result<(bool, f64)> {
        let k = key(p, lattice.h);
        if let Some(v) = memo.get(&k) {
            return Ok(*v);
        }
        let v = member(p)?;
        memo.insert(k, v);
        Ok(v)
    };
    for x in &lattice.points {
        let (inside, value) = check(x)?;
        if !inside || !lattice.is_interior(x) {
            continue;
        }
        used += 1;
        let mut isolated = true;
        for nb in lattice.neighbors(x, 1) {
            if check(&nb)?.0 {
                isolated = false;
                break;
            }
        }
        if isolated {
            return Ok(PropertyVerdict::fail(name, used, Witness::Isolated { x: x.clone(), value }));
        }
    }
    Ok(PropertyVerdict::pass(name, used, true).with_note("boundary lattice points are not examined"))
}

/// Convexity of a lattice-approximated value: segment points of two members
/// must satisfy `still_member` (checked only where the segment point is known
/// to lie in the ambient convex value).
pub fn check_lattice_values_convex(
    xs: &[Point],
    values: &LatticeMap<'_>,
    violation: impl Fn(&Point, &Point) -> Result<Option<f64>>,
    budget: usize,
    seed: u64,
) -> Result<PropertyVerdict> {
    const NAME: &str = "convex_values";
    let mut rng = seeded(seed);
    let per_x = (budget / xs.len().max(1)).max(1);
    let mut used = 0;
    for x in xs {
        let v = values.value(x)?;
        if v.len() < 2 {
            continue;
        }
        for _ in 0..per_x {
            used += 1;
            let y1 = pick(&v, &mut rng);
            let y2 = pick(&v, &mut rng);
            for &t in &SEGMENT_T {
                let yt = y1.lerp(y2, t);
                if let Some(value) = violation(x, &yt)? {
                    return Ok(PropertyVerdict::fail(
                        NAME,
                        used,
                        Witness::NonConvexValue {
                            x: x.clone(),
                            y1: y1.clone(),
                            y2: y2.clone(),
                            t,
                            value,
                        },
                    ));
                }
            }
        }
    }
    Ok(PropertyVerdict::pass(NAME, used, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bifunction::{BuiltinBifunction, QuadraticBifunction};
    use crate::linalg::Matrix;
    use crate::map::{AffineClamp, BuiltinMap};

    fn dom(lo: f64, hi: f64) -> SampleDomain {
        SampleDomain::new(ConvexRegion::interval(lo, hi), 10.0, 0.05)
    }

    fn square() -> Bifunction {
        QuadraticBifunction::difference_of(Matrix::scalar(1.0), vec![0.0]).into()
    }

    fn constant(e: f64) -> Bifunction {
        QuadraticBifunction::constant(1, e).into()
    }

    #[test]
    fn quasiconvexity() {
        assert!(check_quasiconvex_y(&square(), &dom(-2.0, 2.0), 2000, 1).unwrap().passed());
        assert!(check_quasiconvex_y(&constant(0.0), &dom(-2.0, 2.0), 2000, 1).unwrap().passed());
        let concave = Bifunction::Quadratic(QuadraticBifunction {
            q: Matrix::scalar(-1.0),
            ..QuadraticBifunction::zero(1)
        });
        let v = check_quasiconvex_y(&concave, &dom(-1.0, 1.0), 2000, 1).unwrap();
        assert!(v.failed());
        assert_eq!(v.witness().unwrap().recheck("quasiconvex_y", &concave), Some(true));
        // the documented witness (−1, 1, 0.5) re-evaluates as a violation
        let w = Witness::Segment {
            x: Point(vec![0.0]),
            y1: Point(vec![-1.0]),
            y2: Point(vec![1.0]),
            t: 0.5,
            value: 0.0,
            bound: -1.0,
        };
        assert_eq!(w.recheck("quasiconvex_y", &concave), Some(true));
    }

    #[test]
    fn semistrict_quasiconvexity() {
        assert!(check_semistrict_quasiconvex_y(&square(), &dom(-2.0, 2.0), 2000, 3).unwrap().passed());
        assert!(check_semistrict_quasiconvex_y(&constant(0.0), &dom(-2.0, 2.0), 2000, 3).unwrap().passed());
        let clamp = Bifunction::Builtin {
            name: BuiltinBifunction::ClampNorm,
        };
        let v = check_semistrict_quasiconvex_y(&clamp, &dom(-3.0, 3.0), 2000, 3).unwrap();
        assert!(v.failed());
        assert_eq!(v.witness().unwrap().recheck("semistrict_quasiconvex_y", &clamp), Some(true));
        // y1 = 0, y2 = 3, t = 1/3 puts the segment point at 2 where h = 1 = max
        let w = Witness::Segment {
            x: Point(vec![0.0]),
            y1: Point(vec![0.0]),
            y2: Point(vec![3.0]),
            t: 1.0 / 3.0,
            value: 1.0,
            bound: 1.0,
        };
        assert_eq!(w.recheck("semistrict_quasiconvex_y", &clamp), Some(true));
    }

    #[test]
    fn monotonicity_classes() {
        let d = dom(-2.0, 2.0);
        assert!(check_pseudo_monotone(&square(), &d, 2000, 5).unwrap().passed());
        assert!(check_pseudo_monotone(&constant(0.0), &d, 2000, 5).unwrap().passed());
        let one = constant(1.0);
        let v = check_pseudo_monotone(&one, &d, 2000, 5).unwrap();
        assert!(v.failed() && v.samples_used == 1);
        assert_eq!(v.witness().unwrap().recheck("pseudo_monotone", &one), Some(true));
        assert!(check_quasi_monotone(&one, &d, 100, 5).unwrap().failed());
        assert!(check_quasi_monotone(&constant(0.0), &d, 100, 5).unwrap().passed());
        let lin: Bifunction = QuadraticBifunction {
            c: vec![-1.0],
            d: vec![1.0],
            ..QuadraticBifunction::zero(1)
        }
        .into();
        assert!(check_quasi_monotone(&lin, &d, 2000, 5).unwrap().passed());
    }

    #[test]
    fn proper_quasi_monotonicity() {
        let d = dom(-2.0, 2.0);
        assert!(check_properly_quasi_monotone(&square(), &d, 4, 2000, 9).unwrap().passed());
        assert!(check_properly_quasi_monotone(&constant(0.0), &d, 4, 200, 9).unwrap().passed());
        let one = constant(1.0);
        let v = check_properly_quasi_monotone(&one, &d, 4, 200, 9).unwrap();
        assert!(v.failed());
        assert_eq!(v.witness().unwrap().recheck("properly_quasi_monotone", &one), Some(true));
        assert!(check_properly_quasi_monotone(&one, &d, 1, 200, 9).is_err());
    }

    #[test]
    fn upper_sign() {
        let d = dom(0.0, 1.0);
        assert!(check_upper_sign(&square(), &d, 2000, 9, 2).unwrap().passed());
        assert!(check_upper_sign(&constant(0.0), &d, 200, 9, 2).unwrap().passed());
        // −(y − x)²
        let neg: Bifunction = QuadraticBifunction {
            p: Matrix::scalar(-1.0),
            q: Matrix::scalar(-1.0),
            r: Matrix::scalar(2.0),
            ..QuadraticBifunction::zero(1)
        }
        .into();
        let v = check_upper_sign(&neg, &d, 2000, 9, 2).unwrap();
        assert!(v.failed());
        assert_eq!(v.witness().unwrap().recheck("upper_sign", &neg), Some(true));
    }

    #[test]
    fn lsc_falsifier() {
        let d = SampleDomain::new(ConvexRegion::interval(-1.0, 1.0), 2.0, 0.01);
        let step = SetValuedMap::Builtin {
            name: BuiltinMap::StepWiden,
        };
        let v = falsify_lsc(&step, &d, DEFAULT_KAPPA, 10_000, 4).unwrap();
        assert!(v.failed());
        assert_eq!(v.witness().unwrap().recheck_map(&step, 0.01).unwrap(), Some(true));
        let constant = SetValuedMap::constant(ConvexRegion::interval(0.0, 1.0));
        assert!(falsify_lsc(&constant, &d, DEFAULT_KAPPA, 10_000, 4).unwrap().passed());
        let moving = SetValuedMap::moving_box(
            1,
            vec![AffineClamp::new(vec![0.5], 0.0, 0.0, 1.0)],
            vec![AffineClamp::new(vec![0.5], 1.0, 1.0, 2.0)],
        )
        .unwrap();
        assert!(falsify_lsc(&moving, &d, DEFAULT_KAPPA, 10_000, 4).unwrap().passed());
    }

    #[test]
    fn closed_graph_falsifier() {
        let d = SampleDomain::new(ConvexRegion::interval(-1.0, 1.0), 2.0, 0.01);
        let open = SetValuedMap::Builtin {
            name: BuiltinMap::StepNonclosed,
        };
        let v = falsify_closed_graph(&open, &d, 10_000, 4).unwrap();
        assert!(v.failed());
        assert_eq!(v.witness().unwrap().recheck_map(&open, 0.01).unwrap(), Some(true));
        let half_line = SetValuedMap::constant(ConvexRegion::interval(1.0, f64::INFINITY));
        let dd = SampleDomain::new(ConvexRegion::interval(0.0, f64::INFINITY), 8.0, 0.05);
        assert!(falsify_closed_graph(&half_line, &dd, 10_000, 4).unwrap().passed());
        let widen = SetValuedMap::Builtin {
            name: BuiltinMap::StepWiden,
        };
        assert!(falsify_closed_graph(&widen, &d, 10_000, 4).unwrap().passed());
    }

    #[test]
    fn usc_probe() {
        let d = dom(-1.0, 1.0);
        assert!(check_usc_first_argument(&square(), &d, 500, 1).unwrap().passed());
    }

    #[test]
    fn lattice_neighbourhoods() {
        let lat = SampleDomain::new(ConvexRegion::interval(0.0, 1.0), 2.0, 0.25).lattice().unwrap();
        assert_eq!(lat.points.len(), 5);
        assert_eq!(lat.neighbors(&[0.5], 2).len(), 4);
        assert!(lat.is_interior(&[0.5]));
        assert!(!lat.is_interior(&[0.0]));
        let plane = Lattice::new(vec![], 1.0);
        assert_eq!(plane.offsets(2, 1).len(), 4);
        assert_eq!(plane.offsets(2, 2).len(), 12);
    }
}
