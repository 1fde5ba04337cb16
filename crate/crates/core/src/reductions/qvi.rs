//! Quasi-variational inequalities with polytope-valued operators.

use serde::{Deserialize, Serialize};

use crate::bifunction::Bifunction;
use crate::error::{check_dim, QeqError, Result};
use crate::linalg::{dot, sub, Point};
use crate::map::{AffineMap, SetValuedMap};
use crate::properties::{self, PropertyVerdict, SampleDomain};
use crate::region::ConvexRegion;
use crate::solver::check::{enclosing_radius, CheckParams};

/// Named operators outside the affine-vertex family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinOperator {
    /// `{−1}` for `x ≤ 0`, `{1}` for `x > 0` (one-dimensional).
    SignStep,
}

/// `T(x) = co{M_j x + q_j}` or a named builtin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Operator {
    Polytope { vertices: Vec<AffineMap> },
    Builtin { name: BuiltinOperator },
}

impl Operator {
    pub fn polytope(vertices: Vec<AffineMap>) -> Result<Self> {
        let op = Operator::Polytope { vertices };
        op.validate()?;
        Ok(op)
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            Operator::Polytope { vertices } => vertices.first().map(|v| v.offset.len()),
            Operator::Builtin { .. } => Some(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Operator::Polytope { vertices } => {
                let first = vertices
                    .first()
                    .ok_or_else(|| QeqError::Schema("operator needs at least one vertex".into()))?;
                let n = first.offset.len();
                for v in vertices {
                    v.validate()?;
                    v.matrix.check_shape(n, n)?;
                }
                Ok(())
            }
            Operator::Builtin { .. } => Ok(()),
        }
    }

    /// Vertices of `T(x)`.
    pub fn vertices_at(&self, x: &[f64]) -> Vec<Vec<f64>> {
        match self {
            Operator::Polytope { vertices } => vertices.iter().map(|v| v.apply(x)).collect(),
            Operator::Builtin {
                name: BuiltinOperator::SignStep,
            } => vec![vec![if x[0] <= 0.0 { -1.0 } else { 1.0 }]],
        }
    }

    /// `f_T(x,y) = max_j ⟨v_j(x), y − x⟩`.
    pub fn gap(&self, x: &[f64], y: &[f64]) -> f64 {
        let d = sub(y, x);
        self.vertices_at(x)
            .iter()
            .map(|v| dot(v, &d))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// The maximising vertex, a subgradient of `y ↦ f_T(x,y)`.
    pub fn gap_grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let d = sub(y, x);
        let vs = self.vertices_at(x);
        let mut best = 0;
        let mut best_v = f64::NEG_INFINITY;
        for (j, v) in vs.iter().enumerate() {
            let val = dot(v, &d);
            if val > best_v {
                best_v = val;
                best = j;
            }
        }
        vs[best].clone()
    }
}

/// The bifunction `f_T(x,y) = sup_{x* ∈ T(x)} ⟨x*, y − x⟩`.
pub fn qvi_to_qep(operator: &Operator) -> Bifunction {
    Bifunction::Qvi {
        operator: operator.clone(),
    }
}

/// Outcome of [`check_qvi_solution`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QviCheck {
    pub ok: bool,
    pub feasible: bool,
    pub infeasibility: f64,
    /// Best `x* ∈ T(x0)` found and its weights on the vertices.
    pub x_star: Option<Point>,
    pub weights: Option<Vec<f64>>,
    /// `min_y ⟨x*, y − x0⟩` for the best `x*`.
    pub value: Option<f64>,
    pub witness_y: Option<Point>,
}

/// Minimum of the linear functional `⟨a, y − x0⟩` over a region: lattice points
/// plus projected descent, with the lattice computed once per check.
struct LinearMinimizer {
    ys: Vec<Point>,
    region: ConvexRegion,
    x0: Vec<f64>,
}

impl LinearMinimizer {
    fn new(region: ConvexRegion, x0: &[f64], h: f64) -> Result<Option<Self>> {
        if region.is_empty() {
            return Ok(None);
        }
        let bound = enclosing_radius(&region)? + h;
        let mut ys = region.grid_points(h, bound)?;
        if ys.is_empty() {
            ys.push(region.project(x0)?);
        }
        Ok(Some(LinearMinimizer {
            ys,
            region,
            x0: x0.to_vec(),
        }))
    }

    fn min(&self, a: &[f64]) -> Result<(Point, f64)> {
        let val = |y: &[f64]| dot(a, &sub(y, &self.x0));
        let mut best = self.ys[0].clone();
        let mut best_v = val(&best);
        for y in &self.ys[1..] {
            let v = val(y);
            if v < best_v {
                best_v = v;
                best = y.clone();
            }
        }
        // descent along −a with projection, same budget as the bifunction check
        let mut step = 1.0;
        for _ in 0..crate::solver::check::POLISH_STEPS {
            if a.iter().all(|c| *c == 0.0) {
                break;
            }
            let mut improved = false;
            for _ in 0..40 {
                let trial: Vec<f64> = best.iter().zip(a).map(|(y, g)| y - step * g).collect();
                let cand = self.region.project(&trial)?;
                let cv = val(&cand);
                if cv < best_v {
                    best = cand;
                    best_v = cv;
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
            step *= 2.0;
        }
        Ok((best, best_v))
    }
}

fn combine(vs: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let n = vs[0].len();
    let mut out = vec![0.0; n];
    for (v, wi) in vs.iter().zip(w) {
        for k in 0..n {
            out[k] += wi * v[k];
        }
    }
    out
}

/// Tests `x0 ∈ K(x0)` and searches `x* ∈ T(x0)` with `⟨x*, y − x0⟩ ≥ −tol`
/// for every `y ∈ K(x0) ∩ window`.
///
/// The search visits the vertices, the pairwise midpoints, and then improves
/// the best weight vector by golden-section moves along pairs of vertices (the
/// objective `w ↦ min_y ⟨Σ w_j v_j, y − x0⟩` is concave).
pub fn check_qvi_solution(
    operator: &Operator,
    k: &SetValuedMap,
    x0: &[f64],
    window: &ConvexRegion,
    params: CheckParams,
) -> Result<QviCheck> {
    if let Some(n) = operator.dim() {
        check_dim(n, x0.len())?;
    }
    let value = k.evaluate(x0)?;
    let d = value.dist(x0)?;
    if d > params.feas_tol {
        return Ok(QviCheck {
            ok: false,
            feasible: false,
            infeasibility: d,
            x_star: None,
            weights: None,
            value: None,
            witness_y: None,
        });
    }
    let vs = operator.vertices_at(x0);
    let m = vs.len();
    let Some(lin) = LinearMinimizer::new(value.intersect(window)?, x0, params.h)? else {
        return Ok(QviCheck {
            ok: true,
            feasible: true,
            infeasibility: d,
            x_star: Some(Point(vs[0].clone())),
            weights: Some(unit(m, 0)),
            value: None,
            witness_y: None,
        });
    };
    let score = |w: &[f64]| -> Result<(Point, f64)> { lin.min(&combine(&vs, w)) };

    let mut candidates: Vec<Vec<f64>> = (0..m).map(|j| unit(m, j)).collect();
    for i in 0..m {
        for j in i + 1..m {
            let mut w = vec![0.0; m];
            w[i] = 0.5;
            w[j] = 0.5;
            candidates.push(w);
        }
    }
    let mut best_w = candidates[0].clone();
    let (mut best_y, mut best_v) = score(&best_w)?;
    for w in &candidates[1..] {
        let (y, v) = score(w)?;
        if v > best_v {
            best_v = v;
            best_y = y;
            best_w = w.clone();
        }
    }
    if best_v < -params.tol && m >= 2 {
        for _sweep in 0..3 {
            for i in 0..m {
                for j in 0..m {
                    if i == j {
                        continue;
                    }
                    // move weight from j to i: w(s) = best_w + s (e_i − e_j), s ∈ [0, w_j]
                    let cap = best_w[j];
                    if cap <= 0.0 {
                        continue;
                    }
                    let at = |s: f64| {
                        let mut w = best_w.clone();
                        w[i] += s;
                        w[j] -= s;
                        w
                    };
                    let s = golden_max(0.0, cap, |s| score(&at(s)).map(|r| r.1).unwrap_or(f64::NEG_INFINITY));
                    let w = at(s);
                    let (y, v) = score(&w)?;
                    if v > best_v {
                        best_v = v;
                        best_y = y;
                        best_w = w;
                    }
                }
            }
            if best_v >= -params.tol {
                break;
            }
        }
    }
    Ok(QviCheck {
        ok: best_v >= -params.tol,
        feasible: true,
        infeasibility: d,
        x_star: Some(Point(combine(&vs, &best_w))),
        weights: Some(best_w),
        value: Some(best_v),
        witness_y: Some(best_y),
    })
}

fn unit(m: usize, j: usize) -> Vec<f64> {
    let mut w = vec![0.0; m];
    w[j] = 1.0;
    w
}

/// Golden-section search for the maximum of a concave function on `[a, b]`.
fn golden_max(mut a: f64, mut b: f64, phi: impl Fn(f64) -> f64) -> f64 {
    const R: f64 = 0.618_033_988_749_894_8;
    let mut c = b - R * (b - a);
    let mut d = a + R * (b - a);
    let mut fc = phi(c);
    let mut fd = phi(d);
    for _ in 0..60 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - R * (b - a);
            fc = phi(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + R * (b - a);
            fd = phi(d);
        }
        if (b - a).abs() < 1e-12 {
            break;
        }
    }
    let mid = 0.5 * (a + b);
    let candidates = [(a, phi(a)), (mid, phi(mid)), (b, phi(b))];
    candidates
        .iter()
        .fold((mid, f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { *c } else { acc })
        .0
}

/// Proper quasi-monotonicity of `T`: for sampled `x_1..x_m` and hull points
/// `x`, some `i` has `⟨x_i*, x − x_i⟩ ≤ 0` for all vertices `x_i*` of `T(x_i)`.
pub fn check_operator_properly_quasi_monotone(
    operator: &Operator,
    domain: &SampleDomain,
    m_max: usize,
    budget: usize,
    seed: u64,
) -> Result<PropertyVerdict> {
    let f = qvi_to_qep(operator);
    let mut v = properties::check_properly_quasi_monotone(&f, domain, m_max, budget, seed)?;
    v.property = "operator_properly_quasi_monotone".into();
    Ok(v)
}

/// Upper sign-continuity of `T`: if `min_{T(x_t)} ⟨x_t*, y − x⟩ ≥ 0` along the
/// segment then `max_{T(x)} ⟨x*, y − x⟩ ≥ 0`. With vertex-generated values this
/// is the upper sign property of `f_T`, since
/// `f_T(x_t, x) = −(1 − t) min_{T(x_t)} ⟨x_t*, y − x⟩`.
pub fn check_operator_upper_sign_continuous(
    operator: &Operator,
    domain: &SampleDomain,
    budget: usize,
    t_grid: usize,
    seed: u64,
) -> Result<PropertyVerdict> {
    let f = qvi_to_qep(operator);
    let mut v = properties::check_upper_sign(&f, domain, budget, t_grid, seed)?;
    v.property = "operator_upper_sign_continuous".into();
    Ok(v)
}
