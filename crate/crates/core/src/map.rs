//! Parametric set-valued maps `x ↦ K(x) ⊆ R^m` with convex values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, QeqError, Result};
use crate::linalg::{bounds_serde, dot, Matrix, Point};
use crate::region::ConvexRegion;

/// `clamp(aᵀx + b, min, max)`, one bound of a moving box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineClamp {
    pub a: Vec<f64>,
    pub b: f64,
    #[serde(with = "bounds_serde::scalar", default = "neg_inf")]
    pub min: f64,
    #[serde(with = "bounds_serde::scalar", default = "pos_inf")]
    pub max: f64,
}

fn neg_inf() -> f64 {
    f64::NEG_INFINITY
}

fn pos_inf() -> f64 {
    f64::INFINITY
}

impl AffineClamp {
    pub fn new(a: Vec<f64>, b: f64, min: f64, max: f64) -> Self {
        AffineClamp { a, b, min, max }
    }

    /// The constant `c` (for any input dimension).
    pub fn constant(input_dim: usize, c: f64) -> Self {
        AffineClamp::new(vec![0.0; input_dim], c, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let v = dot(&self.a, x) + self.b;
        v.max(self.min).min(self.max)
    }

    /// Lipschitz constant of the bound as a function of `x`.
    pub fn lipschitz(&self) -> f64 {
        crate::linalg::norm(&self.a)
    }
}

/// Named maps whose values cannot be written with the parametric families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinMap {
    /// `{0}` for `x < 0`, `[0, 1]` for `x ≥ 0`; not lower semicontinuous at 0.
    StepWiden,
    /// `{1}` for `x ≤ 0`, `{0}` for `x > 0`; graph not closed at 0.
    StepNonclosed,
}

impl BuiltinMap {
    fn evaluate(self, x: &[f64]) -> ConvexRegion {
        match self {
            BuiltinMap::StepWiden => {
                if x[0] < 0.0 {
                    ConvexRegion::interval(0.0, 0.0)
                } else {
                    ConvexRegion::interval(0.0, 1.0)
                }
            }
            BuiltinMap::StepNonclosed => {
                if x[0] <= 0.0 {
                    ConvexRegion::interval(1.0, 1.0)
                } else {
                    ConvexRegion::interval(0.0, 0.0)
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetValuedMap {
    /// The same region for every input.
    Constant { region: ConvexRegion },
    /// Box whose coordinate bounds are clamped affine functions of the input.
    MovingBox {
        input_dim: usize,
        lower: Vec<AffineClamp>,
        upper: Vec<AffineClamp>,
    },
    /// `K(x) ∩ B̄_radius` with the ball centred at the origin.
    BallRestricted {
        inner: Box<SetValuedMap>,
        radius: f64,
    },
    /// Product of block maps; block `ν` is evaluated at the complementary
    /// coordinates `x^{-ν}`.
    Product {
        blocks: Vec<usize>,
        maps: Vec<SetValuedMap>,
    },
    /// `inner(x)` on `domain`, `outer(x)` elsewhere.
    Glued {
        domain: ConvexRegion,
        inner: Box<SetValuedMap>,
        outer: Box<SetValuedMap>,
    },
    Builtin { name: BuiltinMap },
}

impl SetValuedMap {
    pub fn constant(region: ConvexRegion) -> Self {
        SetValuedMap::Constant { region }
    }

    pub fn moving_box(input_dim: usize, lower: Vec<AffineClamp>, upper: Vec<AffineClamp>) -> Result<Self> {
        let m = SetValuedMap::MovingBox {
            input_dim,
            lower,
            upper,
        };
        m.validate_shape()?;
        Ok(m)
    }

    pub fn product(blocks: Vec<usize>, maps: Vec<SetValuedMap>) -> Result<Self> {
        let m = SetValuedMap::Product { blocks, maps };
        m.validate_shape()?;
        Ok(m)
    }

    /// Dimension of the values.
    pub fn output_dim(&self) -> usize {
        match self {
            SetValuedMap::Constant { region } => region.dim(),
            SetValuedMap::MovingBox { lower, .. } => lower.len(),
            SetValuedMap::BallRestricted { inner, .. } => inner.output_dim(),
            SetValuedMap::Product { blocks, .. } => blocks.iter().sum(),
            SetValuedMap::Glued { outer, .. } => outer.output_dim(),
            SetValuedMap::Builtin { .. } => 1,
        }
    }

    /// Dimension of the argument, `None` for maps that ignore it.
    pub fn input_dim(&self) -> Option<usize> {
        match self {
            SetValuedMap::Constant { .. } => None,
            SetValuedMap::MovingBox { input_dim, .. } => Some(*input_dim),
            SetValuedMap::BallRestricted { inner, .. } => inner.input_dim(),
            SetValuedMap::Product { blocks, .. } => Some(blocks.iter().sum()),
            SetValuedMap::Glued { domain, .. } => Some(domain.dim()),
            SetValuedMap::Builtin { .. } => Some(1),
        }
    }

    /// Structural checks that do not need sampling.
    pub fn validate_shape(&self) -> Result<()> {
        let schema = |m: String| Err(QeqError::Schema(m));
        match self {
            SetValuedMap::Constant { .. } | SetValuedMap::Builtin { .. } => Ok(()),
            SetValuedMap::MovingBox {
                input_dim,
                lower,
                upper,
            } => {
                if lower.len() != upper.len() || lower.is_empty() {
                    return schema(format!(
                        "moving box needs matching non-empty bound lists, got {} and {}",
                        lower.len(),
                        upper.len()
                    ));
                }
                for c in lower.iter().chain(upper) {
                    if c.a.len() != *input_dim {
                        return schema(format!(
                            "moving box bound has {} coefficients, input dimension is {input_dim}",
                            c.a.len()
                        ));
                    }
                    if c.min.is_nan() || c.max.is_nan() || c.min > c.max || !c.b.is_finite() {
                        return schema("moving box clamp range is malformed".into());
                    }
                }
                Ok(())
            }
            SetValuedMap::BallRestricted { inner, radius } => {
                if !(*radius > 0.0) {
                    return schema(format!("restriction radius must be positive, got {radius}"));
                }
                inner.validate_shape()
            }
            SetValuedMap::Product { blocks, maps } => {
                if blocks.len() != maps.len() || blocks.is_empty() {
                    return schema("product needs one map per block".into());
                }
                let n: usize = blocks.iter().sum();
                for (nu, (b, m)) in blocks.iter().zip(maps).enumerate() {
                    m.validate_shape()?;
                    if m.output_dim() != *b {
                        return schema(format!("block {nu} map has output dimension {}, expected {b}", m.output_dim()));
                    }
                    if let Some(d) = m.input_dim() {
                        if d != n - b {
                            return schema(format!("block {nu} map takes dimension {d}, expected {}", n - b));
                        }
                    }
                    if matches!(m, SetValuedMap::BallRestricted { .. }) {
                        return schema("ball restriction inside a product is not supported".into());
                    }
                }
                Ok(())
            }
            SetValuedMap::Glued { domain, inner, outer } => {
                inner.validate_shape()?;
                outer.validate_shape()?;
                check_dim(outer.output_dim(), inner.output_dim())?;
                for d in [inner.input_dim(), outer.input_dim()].into_iter().flatten() {
                    check_dim(domain.dim(), d)?;
                }
                Ok(())
            }
        }
    }

    /// The value at `x`; may be an empty region.
    pub fn evaluate(&self, x: &[f64]) -> Result<ConvexRegion> {
        if let Some(d) = self.input_dim() {
            check_dim(d, x.len())?;
        }
        match self {
            SetValuedMap::Constant { region } => Ok(region.clone()),
            SetValuedMap::MovingBox { lower, upper, .. } => {
                let lo: Vec<f64> = lower.iter().map(|c| c.eval(x)).collect();
                let hi: Vec<f64> = upper.iter().map(|c| c.eval(x)).collect();
                if lo.iter().zip(&hi).any(|(l, h)| l > h) {
                    return Ok(ConvexRegion::empty(lo.len()));
                }
                ConvexRegion::boxed(lo, hi)
            }
            SetValuedMap::BallRestricted { inner, radius } => {
                inner.evaluate(x)?.intersect_origin_ball(*radius)
            }
            SetValuedMap::Product { blocks, maps } => {
                let mut parts = Vec::with_capacity(maps.len());
                let mut offset = 0;
                for (b, m) in blocks.iter().zip(maps) {
                    let complement: Vec<f64> = x[..offset].iter().chain(&x[offset + b..]).copied().collect();
                    parts.push(m.evaluate(&complement)?);
                    offset += b;
                }
                ConvexRegion::product(&parts)
            }
            SetValuedMap::Glued { domain, inner, outer } => {
                if domain.contains(x)? {
                    inner.evaluate(x)
                } else {
                    outer.evaluate(x)
                }
            }
            SetValuedMap::Builtin { name } => Ok(name.evaluate(x)),
        }
    }

    /// Checks that every moving box has `lo ≤ hi` at each lattice point of
    /// `domain ∩ B̄_window`; the offending input is reported on failure.
    pub fn validate_on(&self, domain: &ConvexRegion, window: f64, h: f64) -> Result<()> {
        if !self.has_moving_box() {
            return Ok(());
        }
        for x in domain.grid_points(h, window)? {
            if let Some(at) = self.inverted_bounds_at(&x)? {
                return Err(QeqError::Schema(format!(
                    "moving box has lower bound above upper bound at {at:?}"
                )));
            }
        }
        Ok(())
    }

    fn has_moving_box(&self) -> bool {
        match self {
            SetValuedMap::MovingBox { .. } => true,
            SetValuedMap::BallRestricted { inner, .. } => inner.has_moving_box(),
            SetValuedMap::Product { maps, .. } => maps.iter().any(|m| m.has_moving_box()),
            SetValuedMap::Glued { inner, outer, .. } => inner.has_moving_box() || outer.has_moving_box(),
            _ => false,
        }
    }

    fn inverted_bounds_at(&self, x: &[f64]) -> Result<Option<Point>> {
        match self {
            SetValuedMap::MovingBox { lower, upper, .. } => {
                let bad = lower.iter().zip(upper).any(|(l, u)| l.eval(x) > u.eval(x));
                Ok(bad.then(|| Point(x.to_vec())))
            }
            SetValuedMap::BallRestricted { inner, .. } => inner.inverted_bounds_at(x),
            SetValuedMap::Product { blocks, maps } => {
                let mut offset = 0;
                for (b, m) in blocks.iter().zip(maps) {
                    let complement: Vec<f64> = x[..offset].iter().chain(&x[offset + b..]).copied().collect();
                    if m.inverted_bounds_at(&complement)?.is_some() {
                        return Ok(Some(Point(x.to_vec())));
                    }
                    offset += b;
                }
                Ok(None)
            }
            SetValuedMap::Glued { domain, inner, outer } => {
                if domain.contains(x)? {
                    inner.inverted_bounds_at(x)
                } else {
                    outer.inverted_bounds_at(x)
                }
            }
            _ => Ok(None),
        }
    }

    /// `dist(y, K(x))`, infinite when the value is empty.
    pub fn dist_to_value(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.evaluate(x)?.dist(y)
    }

    /// Grid-consistent fixed point test `dist(x, K(x)) ≤ slack`.
    pub fn is_near_fixed(&self, x: &[f64], slack: f64) -> Result<bool> {
        Ok(self.dist_to_value(x, x)? <= slack)
    }

    /// Whether this map (or any sub-map) is a hand-written builtin.
    pub fn is_builtin(&self) -> bool {
        match self {
            SetValuedMap::Builtin { .. } => true,
            SetValuedMap::BallRestricted { inner, .. } => inner.is_builtin(),
            SetValuedMap::Product { maps, .. } => maps.iter().any(|m| m.is_builtin()),
            SetValuedMap::Glued { inner, outer, .. } => inner.is_builtin() || outer.is_builtin(),
            _ => false,
        }
    }

    /// Largest Lipschitz constant of the moving-box bounds, zero for constants.
    /// `None` when the map is not built from Lipschitz pieces.
    pub fn bound_lipschitz(&self) -> Option<f64> {
        match self {
            SetValuedMap::Constant { .. } => Some(0.0),
            SetValuedMap::MovingBox { lower, upper, .. } => {
                Some(lower.iter().chain(upper).map(AffineClamp::lipschitz).fold(0.0, f64::max))
            }
            SetValuedMap::BallRestricted { inner, .. } => inner.bound_lipschitz(),
            SetValuedMap::Product { maps, .. } => {
                maps.iter().map(|m| m.bound_lipschitz()).try_fold(0.0f64, |acc, l| l.map(|l| acc.max(l)))
            }
            SetValuedMap::Glued { .. } | SetValuedMap::Builtin { .. } => None,
        }
    }
}

/// `x ↦ K(x) ∩ B̄_ρ`.
pub fn restrict_to_ball(map: &SetValuedMap, rho: f64) -> Result<SetValuedMap> {
    if !(rho > 0.0) {
        return Err(QeqError::InvalidArgument(format!("ball radius must be positive, got {rho}")));
    }
    Ok(SetValuedMap::BallRestricted {
        inner: Box::new(map.clone()),
        radius: rho,
    })
}

/// Glues `inner` on `domain` to `outer` elsewhere, after checking
/// `inner(x) ⊆ outer(x)` on the lattice of `domain ∩ B̄_window`.
pub fn glue_maps(
    domain: &ConvexRegion,
    inner: &SetValuedMap,
    outer: &SetValuedMap,
    window: f64,
    h: f64,
) -> Result<SetValuedMap> {
    for x in domain.grid_points(h, window)? {
        let s = inner.evaluate(&x)?;
        let t = outer.evaluate(&x)?;
        if s.escape_point(&t, window, h)?.is_some() {
            return Err(QeqError::InclusionViolated { witness: x });
        }
    }
    let glued = SetValuedMap::Glued {
        domain: domain.clone(),
        inner: Box::new(inner.clone()),
        outer: Box::new(outer.clone()),
    };
    glued.validate_shape()?;
    Ok(glued)
}

/// `x ↦ M x + q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineMap {
    pub matrix: Matrix,
    pub offset: Vec<f64>,
}

impl AffineMap {
    pub fn new(matrix: Matrix, offset: Vec<f64>) -> Result<Self> {
        let m = AffineMap { matrix, offset };
        m.validate()?;
        Ok(m)
    }

    /// Constant map `x ↦ q`.
    pub fn constant(n: usize, q: Vec<f64>) -> Self {
        AffineMap {
            matrix: Matrix::zeros(q.len(), n),
            offset: q,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.matrix.validate()?;
        check_dim(self.matrix.rows, self.offset.len())
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut v = self.matrix.mul_vec(x);
        for (vi, qi) in v.iter_mut().zip(&self.offset) {
            *vi += qi;
        }
        v
    }
}

/// Finitely many affine images `{M_j x + q_j}`; values are not convex, use
/// [`co_sampler`] to reach their hull.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinitePointMap {
    pub maps: Vec<AffineMap>,
}

impl FinitePointMap {
    pub fn image(&self, x: &[f64]) -> Vec<Point> {
        self.maps.iter().map(|m| Point(m.apply(x))).collect()
    }
}

/// A convex combination together with the weights that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HullSample {
    pub point: Point,
    pub weights: Vec<f64>,
}

impl HullSample {
    /// Recomputes `Σ λ_i p_i` and reports the largest coordinate error.
    pub fn certificate_error(&self, pts: &[Point]) -> f64 {
        let q = combine(pts, &self.weights);
        q.iter()
            .zip(self.point.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `Σ λ_i p_i`.
pub fn combine(pts: &[Point], weights: &[f64]) -> Point {
    let n = pts[0].dim();
    let mut q = vec![0.0; n];
    for (p, w) in pts.iter().zip(weights) {
        for k in 0..n {
            q[k] += w * p[k];
        }
    }
    Point(q)
}

/// Draws `m` points of `co(pts)` with weights uniform on the simplex.
pub fn co_sampler(pts: &[Point], m: usize, seed: u64) -> Result<Vec<HullSample>> {
    let first = pts.first().ok_or_else(|| QeqError::InvalidArgument("hull of an empty set".into()))?;
    for p in pts {
        check_dim(first.dim(), p.dim())?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        // exponential spacings normalised to one are uniform on the simplex
        let mut w: Vec<f64> = (0..pts.len())
            .map(|_| -(1.0 - rng.gen::<f64>()).ln())
            .collect();
        let s: f64 = w.iter().sum();
        if s > 0.0 {
            w.iter_mut().for_each(|wi| *wi /= s);
        } else {
            w = vec![1.0 / pts.len() as f64; pts.len()];
        }
        out.push(HullSample {
            point: combine(pts, &w),
            weights: w,
        });
    }
    Ok(out)
}
