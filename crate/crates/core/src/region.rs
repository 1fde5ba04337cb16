//! Finitely represented convex subsets of R^n.
//!
//! A [`ConvexRegion`] is the intersection of a (possibly unbounded) box, a list
//! of halfspaces `aᵀx ≤ b` and a list of closed balls. Projection onto a single
//! piece is closed form; intersections go through Dykstra's cyclic projection.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, QeqError, Result};
use crate::linalg::{bounds_serde, dist, dot, norm, Point};

/// Residual tolerance for membership tests.
pub const CONTAINS_TOL: f64 = 1e-12;
/// Accuracy target of the projection.
pub const PROJ_TOL: f64 = 1e-9;
/// Iteration cap of the cyclic projection.
pub const PROJ_MAX_CYCLES: usize = 10_000;
/// Largest lattice that [`ConvexRegion::grid_points`] will enumerate.
pub const GRID_LIMIT: usize = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Halfspace {
    pub a: Vec<f64>,
    pub b: f64,
}

impl Halfspace {
    fn residual(&self, x: &[f64]) -> f64 {
        dot(&self.a, x) - self.b
    }

    fn project(&self, x: &mut [f64]) {
        let r = self.residual(x);
        let aa = dot(&self.a, &self.a);
        if r > 0.0 && aa > 0.0 {
            let s = r / aa;
            for (xi, ai) in x.iter_mut().zip(&self.a) {
                *xi -= s * ai;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    fn residual(&self, x: &[f64]) -> f64 {
        dist(x, &self.center) - self.radius
    }

    fn project(&self, x: &mut [f64]) {
        let d = dist(x, &self.center);
        if d > self.radius {
            let s = self.radius / d;
            for (xi, ci) in x.iter_mut().zip(self.center.iter()) {
                *xi = ci + s * (*xi - ci);
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionRepr {
    dim: usize,
    #[serde(with = "bounds_serde")]
    lo: Vec<f64>,
    #[serde(with = "bounds_serde")]
    hi: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    halfspaces: Vec<Halfspace>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    balls: Vec<Ball>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    empty: bool,
}

/// Box ∩ halfspaces ∩ balls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RegionRepr", into = "RegionRepr")]
pub struct ConvexRegion {
    dim: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    halfspaces: Vec<Halfspace>,
    balls: Vec<Ball>,
    /// Set when emptiness is known at construction time.
    empty: bool,
}

impl TryFrom<RegionRepr> for ConvexRegion {
    type Error = QeqError;

    fn try_from(r: RegionRepr) -> Result<Self> {
        let region = ConvexRegion {
            dim: r.dim,
            lo: r.lo,
            hi: r.hi,
            halfspaces: r.halfspaces,
            balls: r.balls,
            empty: r.empty,
        };
        region.validate()?;
        Ok(region)
    }
}

impl From<ConvexRegion> for RegionRepr {
    fn from(r: ConvexRegion) -> Self {
        RegionRepr {
            dim: r.dim,
            lo: r.lo,
            hi: r.hi,
            halfspaces: r.halfspaces,
            balls: r.balls,
            empty: r.empty,
        }
    }
}

enum Piece<'a> {
    Box,
    Half(&'a Halfspace),
    Ball(&'a Ball),
}

impl ConvexRegion {
    /// All of R^n.
    pub fn whole(dim: usize) -> Self {
        ConvexRegion {
            dim,
            lo: vec![f64::NEG_INFINITY; dim],
            hi: vec![f64::INFINITY; dim],
            halfspaces: Vec::new(),
            balls: Vec::new(),
            empty: false,
        }
    }

    pub fn empty(dim: usize) -> Self {
        ConvexRegion {
            empty: true,
            ..ConvexRegion::whole(dim)
        }
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        let dim = lo.len();
        let mut r = ConvexRegion {
            dim,
            lo,
            hi,
            halfspaces: Vec::new(),
            balls: Vec::new(),
            empty: false,
        };
        r.validate()?;
        r.refresh_empty_flag();
        Ok(r)
    }

    /// One-dimensional interval `[lo, hi]`; either end may be infinite.
    pub fn interval(lo: f64, hi: f64) -> Self {
        ConvexRegion::boxed(vec![lo], vec![hi]).expect("interval bounds are never NaN here")
    }

    /// Closed ball.
    pub fn ball(center: Point, radius: f64) -> Result<Self> {
        ConvexRegion::whole(center.dim()).with_ball(center, radius)
    }

    /// Closed ball of radius `radius` centred at the origin.
    pub fn origin_ball(dim: usize, radius: f64) -> Result<Self> {
        ConvexRegion::ball(Point::zeros(dim), radius)
    }

    pub fn with_halfspace(mut self, a: Vec<f64>, b: f64) -> Result<Self> {
        check_dim(self.dim, a.len())?;
        self.halfspaces.push(Halfspace { a, b });
        self.validate()?;
        self.refresh_empty_flag();
        Ok(self)
    }

    pub fn with_ball(mut self, center: Point, radius: f64) -> Result<Self> {
        check_dim(self.dim, center.dim())?;
        self.balls.push(Ball { center, radius });
        self.validate()?;
        self.refresh_empty_flag();
        Ok(self)
    }

    /// Intersection with the closed ball of radius `radius` about the origin.
    pub fn intersect_origin_ball(&self, radius: f64) -> Result<Self> {
        self.clone().with_ball(Point::zeros(self.dim), radius)
    }

    pub fn intersect(&self, other: &ConvexRegion) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        let mut out = self.clone();
        for i in 0..self.dim {
            out.lo[i] = out.lo[i].max(other.lo[i]);
            out.hi[i] = out.hi[i].min(other.hi[i]);
        }
        out.halfspaces.extend(other.halfspaces.iter().cloned());
        out.balls.extend(other.balls.iter().cloned());
        out.empty |= other.empty;
        out.refresh_empty_flag();
        Ok(out)
    }

    /// Cartesian product; halfspaces are padded with zeros, balls are not supported.
    pub fn product(parts: &[ConvexRegion]) -> Result<Self> {
        let dim: usize = parts.iter().map(|p| p.dim).sum();
        let mut out = ConvexRegion::whole(dim);
        let mut offset = 0;
        for p in parts {
            if !p.balls.is_empty() {
                return Err(QeqError::InvalidArgument(
                    "product of regions with ball constraints is not representable".into(),
                ));
            }
            out.lo[offset..offset + p.dim].copy_from_slice(&p.lo);
            out.hi[offset..offset + p.dim].copy_from_slice(&p.hi);
            for h in &p.halfspaces {
                let mut a = vec![0.0; dim];
                a[offset..offset + p.dim].copy_from_slice(&h.a);
                out.halfspaces.push(Halfspace { a, b: h.b });
            }
            out.empty |= p.empty;
            offset += p.dim;
        }
        out.refresh_empty_flag();
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> &[f64] {
        &self.lo
    }

    pub fn upper(&self) -> &[f64] {
        &self.hi
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }

    pub fn is_box_only(&self) -> bool {
        self.halfspaces.is_empty() && self.balls.is_empty()
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(QeqError::Schema(msg));
        if self.lo.len() != self.dim || self.hi.len() != self.dim {
            return bad(format!("region of dim {} has bounds of length {}/{}", self.dim, self.lo.len(), self.hi.len()));
        }
        if self.lo.iter().chain(&self.hi).any(|v| v.is_nan()) {
            return bad("NaN box bound".into());
        }
        for h in &self.halfspaces {
            if h.a.len() != self.dim || !h.b.is_finite() || h.a.iter().any(|v| !v.is_finite()) {
                return bad("malformed halfspace".into());
            }
        }
        for b in &self.balls {
            if b.center.dim() != self.dim || !b.center.is_finite() {
                return bad("malformed ball centre".into());
            }
            if !(b.radius > 0.0) || !b.radius.is_finite() {
                return bad(format!("ball radius must be positive, got {}", b.radius));
            }
        }
        Ok(())
    }

    fn refresh_empty_flag(&mut self) {
        if self.quick_empty_certificate() {
            self.empty = true;
        }
    }

    /// Cheap pairwise disjointness certificates.
    fn quick_empty_certificate(&self) -> bool {
        if self.empty {
            return true;
        }
        if self.lo.iter().zip(&self.hi).any(|(l, h)| l > &(h + CONTAINS_TOL)) {
            return true;
        }
        if self.dim == 1 {
            return self.interval_1d().is_none();
        }
        for h in &self.halfspaces {
            let aa = norm(&h.a);
            if aa == 0.0 {
                if h.b < 0.0 {
                    return true;
                }
                continue;
            }
            // minimum of aᵀx over the box
            let min_box: f64 = h
                .a
                .iter()
                .enumerate()
                .map(|(i, &ai)| {
                    if ai > 0.0 {
                        ai * self.lo[i]
                    } else if ai < 0.0 {
                        ai * self.hi[i]
                    } else {
                        0.0
                    }
                })
                .sum();
            if min_box > h.b + CONTAINS_TOL {
                return true;
            }
            for b in &self.balls {
                if dot(&h.a, &b.center) - b.radius * aa > h.b + CONTAINS_TOL {
                    return true;
                }
            }
        }
        for (i, b) in self.balls.iter().enumerate() {
            let clamped: Vec<f64> = b
                .center
                .iter()
                .enumerate()
                .map(|(k, c)| c.clamp(self.lo[k], self.hi[k]))
                .collect();
            if dist(&clamped, &b.center) > b.radius + CONTAINS_TOL {
                return true;
            }
            for other in &self.balls[i + 1..] {
                if b.center.dist(&other.center) > b.radius + other.radius + CONTAINS_TOL {
                    return true;
                }
            }
        }
        false
    }

    /// Exact interval form of a one-dimensional region.
    fn interval_1d(&self) -> Option<(f64, f64)> {
        debug_assert_eq!(self.dim, 1);
        if self.empty {
            return None;
        }
        let (mut lo, mut hi) = (self.lo[0], self.hi[0]);
        for h in &self.halfspaces {
            let a = h.a[0];
            if a > 0.0 {
                hi = hi.min(h.b / a);
            } else if a < 0.0 {
                lo = lo.max(h.b / a);
            } else if h.b < 0.0 {
                return None;
            }
        }
        for b in &self.balls {
            lo = lo.max(b.center[0] - b.radius);
            hi = hi.min(b.center[0] + b.radius);
        }
        if lo > hi + CONTAINS_TOL {
            None
        } else {
            Some((lo, hi.max(lo)))
        }
    }

    /// Whether emptiness was certified without iterating.
    pub fn certified_empty(&self) -> bool {
        self.quick_empty_certificate()
    }

    /// Emptiness probe: a certificate, or a projection that fails to land inside.
    pub fn is_empty(&self) -> bool {
        if self.certified_empty() {
            return true;
        }
        self.project(&Point::zeros(self.dim)).is_err()
    }

    /// Membership up to [`CONTAINS_TOL`] on every constraint residual.
    pub fn contains(&self, p: &[f64]) -> Result<bool> {
        check_dim(self.dim, p.len())?;
        Ok(self.contains_unchecked(p))
    }

    pub(crate) fn contains_unchecked(&self, p: &[f64]) -> bool {
        if self.empty {
            return false;
        }
        for i in 0..self.dim {
            if p[i] < self.lo[i] - CONTAINS_TOL || p[i] > self.hi[i] + CONTAINS_TOL {
                return false;
            }
        }
        self.halfspaces.iter().all(|h| h.residual(p) <= CONTAINS_TOL)
            && self.balls.iter().all(|b| b.residual(p) <= CONTAINS_TOL)
    }

    fn pieces(&self) -> Vec<Piece<'_>> {
        let mut out = Vec::with_capacity(1 + self.halfspaces.len() + self.balls.len());
        if self.lo.iter().chain(&self.hi).any(|v| v.is_finite()) {
            out.push(Piece::Box);
        }
        out.extend(self.halfspaces.iter().filter(|h| norm(&h.a) > 0.0).map(Piece::Half));
        out.extend(self.balls.iter().map(Piece::Ball));
        out
    }

    fn project_piece(&self, piece: &Piece<'_>, x: &mut [f64]) {
        match piece {
            Piece::Box => {
                for i in 0..self.dim {
                    x[i] = x[i].clamp(self.lo[i], self.hi[i].max(self.lo[i]));
                }
            }
            Piece::Half(h) => h.project(x),
            Piece::Ball(b) => b.project(x),
        }
    }

    /// Largest constraint residual (zero when feasible).
    fn violation(&self, x: &[f64]) -> f64 {
        let mut v: f64 = 0.0;
        for i in 0..self.dim {
            v = v.max(self.lo[i] - x[i]).max(x[i] - self.hi[i]);
        }
        for h in &self.halfspaces {
            let aa = norm(&h.a);
            if aa > 0.0 {
                v = v.max(h.residual(x) / aa);
            }
        }
        for b in &self.balls {
            v = v.max(b.residual(x));
        }
        v
    }

    /// Euclidean projection.
    ///
    /// Box-only regions are clamped exactly and one-dimensional regions are
    /// reduced to an interval. Otherwise, if projecting onto one piece already
    /// lands inside the whole region that is the answer; failing that, Dykstra's
    /// cyclic projection runs until the cycle residual drops below
    /// [`PROJ_TOL`] or [`PROJ_MAX_CYCLES`] is hit.
    pub fn project(&self, p: &[f64]) -> Result<Point> {
        check_dim(self.dim, p.len())?;
        if self.certified_empty() {
            return Err(QeqError::EmptyRegion);
        }
        if self.dim == 1 {
            let (lo, hi) = self.interval_1d().ok_or(QeqError::EmptyRegion)?;
            return Ok(Point(vec![p[0].clamp(lo, hi)]));
        }
        let pieces = self.pieces();
        if pieces.is_empty() {
            return Ok(Point(p.to_vec()));
        }
        for piece in &pieces {
            let mut x = p.to_vec();
            self.project_piece(piece, &mut x);
            if self.violation(&x) <= CONTAINS_TOL {
                return Ok(Point(x));
            }
            if pieces.len() == 1 {
                return Ok(Point(x));
            }
        }
        self.dykstra(p, &pieces)
    }

    fn dykstra(&self, p: &[f64], pieces: &[Piece<'_>]) -> Result<Point> {
        let n = self.dim;
        let mut x = p.to_vec();
        let mut increments = vec![vec![0.0; n]; pieces.len()];
        let mut y = vec![0.0; n];
        let mut last_change = f64::INFINITY;
        for _ in 0..PROJ_MAX_CYCLES {
            let start = x.clone();
            for (piece, inc) in pieces.iter().zip(increments.iter_mut()) {
                for k in 0..n {
                    y[k] = x[k] + inc[k];
                }
                x.copy_from_slice(&y);
                self.project_piece(piece, &mut x);
                for k in 0..n {
                    inc[k] = y[k] - x[k];
                }
            }
            last_change = dist(&start, &x);
            if last_change <= 1e-14 * (1.0 + norm(&x)) && self.violation(&x) <= CONTAINS_TOL {
                return Ok(Point(x));
            }
        }
        let residual = self.violation(&x).max(last_change);
        if residual < PROJ_TOL {
            // close enough: push the last bit of infeasibility out with plain alternating projections
            for _ in 0..100 {
                if self.violation(&x) <= CONTAINS_TOL {
                    break;
                }
                for piece in pieces {
                    self.project_piece(piece, &mut x);
                }
            }
            return Ok(Point(x));
        }
        Err(QeqError::NonConvergence {
            iterations: PROJ_MAX_CYCLES,
            residual,
        })
    }

    /// Distance from `p`; `+∞` for an empty region.
    pub fn dist(&self, p: &[f64]) -> Result<f64> {
        match self.project(p) {
            Ok(q) => Ok(dist(&q, p)),
            Err(QeqError::EmptyRegion) | Err(QeqError::NonConvergence { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    }

    /// Axis-aligned bounding box implied by the box and the balls (and the
    /// halfspaces in one dimension).
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        if self.dim == 1 {
            return match self.interval_1d() {
                Some((l, h)) => (vec![l], vec![h]),
                None => (vec![1.0], vec![0.0]),
            };
        }
        let mut lo = self.lo.clone();
        let mut hi = self.hi.clone();
        for b in &self.balls {
            for i in 0..self.dim {
                lo[i] = lo[i].max(b.center[i] - b.radius);
                hi[i] = hi[i].min(b.center[i] + b.radius);
            }
        }
        (lo, hi)
    }

    pub fn is_bounded(&self) -> bool {
        let (lo, hi) = self.bounding_box();
        lo.iter().chain(&hi).all(|v| v.is_finite())
    }

    /// Index ranges of the lattice over the bounding box clipped to `[−bound, bound]^n`
    /// and the number of lattice points in that box.
    fn lattice_ranges(&self, h: f64, bound: f64) -> Option<(Vec<(i64, i64)>, f64)> {
        let (lo, hi) = self.bounding_box();
        let mut ranges = Vec::with_capacity(self.dim);
        let mut count = 1.0f64;
        for i in 0..self.dim {
            let l = lo[i].max(-bound);
            let u = hi[i].min(bound);
            let kl = (l / h - 1e-9).ceil();
            let ku = (u / h + 1e-9).floor();
            if ku < kl {
                return None;
            }
            count *= ku - kl + 1.0;
            ranges.push((kl as i64, ku as i64));
        }
        Some((ranges, count))
    }

    /// Upper bound on the number of points [`grid_points`](Self::grid_points) returns.
    pub fn grid_count_bound(&self, h: f64, bound: f64) -> f64 {
        if self.certified_empty() {
            return 0.0;
        }
        self.lattice_ranges(h, bound).map_or(0.0, |r| r.1)
    }

    /// All points `h·k` (k integer) of `self ∩ B̄_bound`, in lexicographic order.
    pub fn grid_points(&self, h: f64, bound: f64) -> Result<Vec<Point>> {
        if !(h > 0.0) || !(bound > 0.0) {
            return Err(QeqError::InvalidArgument(format!(
                "grid spacing and bound must be positive (h={h}, bound={bound})"
            )));
        }
        if self.certified_empty() {
            return Ok(Vec::new());
        }
        let Some((ranges, count)) = self.lattice_ranges(h, bound) else {
            return Ok(Vec::new());
        };
        if count > GRID_LIMIT as f64 {
            return Err(QeqError::ExplosionGuard {
                count,
                limit: GRID_LIMIT,
            });
        }
        let mut out = Vec::new();
        let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        let mut p = vec![0.0; self.dim];
        let bound_tol = bound + CONTAINS_TOL;
        loop {
            for (pi, k) in p.iter_mut().zip(&idx) {
                *pi = *k as f64 * h;
            }
            if norm(&p) <= bound_tol && self.contains_unchecked(&p) {
                out.push(Point(p.clone()));
            }
            // odometer, last coordinate fastest
            let mut d = self.dim;
            loop {
                if d == 0 {
                    return Ok(out);
                }
                d -= 1;
                if idx[d] < ranges[d].1 {
                    idx[d] += 1;
                    break;
                }
                idx[d] = ranges[d].0;
            }
        }
    }

    /// Searches for a point of `self` outside `other`.
    ///
    /// Box-only pairs are decided exactly. Otherwise the test uses projections
    /// of far-away points (to catch unbounded directions) and the lattice of
    /// `self ∩ B̄_window` at spacing `h`. `None` means no escaping point found.
    pub fn escape_point(&self, other: &ConvexRegion, window: f64, h: f64) -> Result<Option<Point>> {
        check_dim(self.dim, other.dim)?;
        if self.is_empty() {
            return Ok(None);
        }
        if other.certified_empty() {
            return Ok(Some(self.project(&Point::zeros(self.dim))?));
        }
        if self.is_box_only() && other.is_box_only() {
            return Ok(self.box_escape(other));
        }
        let far = 4.0 * (window + 1.0);
        let mut probes = Vec::new();
        for i in 0..self.dim {
            for s in [-1.0, 1.0] {
                let mut d = vec![0.0; self.dim];
                d[i] = s * far;
                probes.push(d);
            }
        }
        for mask in 0..(1usize << self.dim) {
            let d: Vec<f64> = (0..self.dim)
                .map(|i| if mask >> i & 1 == 1 { far } else { -far })
                .collect();
            probes.push(d);
        }
        for d in probes {
            let q = self.project(&d)?;
            if !other.contains_unchecked(&q) {
                return Ok(Some(q));
            }
        }
        for q in self.grid_points(h, window)? {
            if !other.contains_unchecked(&q) {
                return Ok(Some(q));
            }
        }
        Ok(None)
    }

    fn box_escape(&self, other: &ConvexRegion) -> Option<Point> {
        let base: Vec<f64> = (0..self.dim)
            .map(|i| 0.0f64.clamp(self.lo[i], self.hi[i]))
            .collect();
        for i in 0..self.dim {
            if self.lo[i] < other.lo[i] - CONTAINS_TOL {
                let mut q = base.clone();
                q[i] = if self.lo[i].is_finite() { self.lo[i] } else { other.lo[i] - 1.0 };
                return Some(Point(q));
            }
            if self.hi[i] > other.hi[i] + CONTAINS_TOL {
                let mut q = base.clone();
                q[i] = if self.hi[i].is_finite() { self.hi[i] } else { other.hi[i] + 1.0 };
                return Some(Point(q));
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[f64]) -> Point {
        Point(v.to_vec())
    }

    #[test]
    fn contains_examples() {
        let half_line = ConvexRegion::interval(1.0, f64::INFINITY);
        assert!(half_line.contains(&[7.0]).unwrap());
        let disk = ConvexRegion::origin_ball(2, 2.0).unwrap();
        assert!(!disk.contains(&[3.0, 0.0]).unwrap());
        let half = ConvexRegion::whole(2).with_halfspace(vec![1.0, 1.0], 1.0).unwrap();
        assert!(half.contains(&[0.5, 0.5]).unwrap());
        assert!(matches!(
            half.contains(&[0.5]),
            Err(QeqError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn project_examples() {
        let half_line = ConvexRegion::interval(1.0, f64::INFINITY);
        assert_eq!(half_line.project(&[-3.0]).unwrap(), p(&[1.0]));
        let disk = ConvexRegion::origin_ball(2, 2.0).unwrap();
        let q = disk.project(&[2.0, 2.0]).unwrap();
        let s = 2f64.sqrt();
        assert!((q[0] - s).abs() < 1e-12 && (q[1] - s).abs() < 1e-12);
    }

    #[test]
    fn project_onto_triangle_matches_grid_oracle() {
        let tri = ConvexRegion::boxed(vec![0.0, 0.0], vec![1.0, 1.0])
            .unwrap()
            .with_halfspace(vec![1.0, 1.0], 1.0)
            .unwrap();
        // oracle: argmin of the distance over a 1e-3 lattice of the triangle
        let target = [1.0, 1.0];
        let best = tri
            .grid_points(1e-3, 2.0)
            .unwrap()
            .into_iter()
            .min_by(|a, b| dist(a, &target).total_cmp(&dist(b, &target)))
            .unwrap();
        assert!((best[0] - 0.5).abs() < 1e-9 && (best[1] - 0.5).abs() < 1e-9);
        let q = tri.project(&target).unwrap();
        assert!(dist(&q, &best) < 1e-9, "{q:?}");
    }

    #[test]
    fn dykstra_on_box_and_ball() {
        let r = ConvexRegion::boxed(vec![0.5, -1.0], vec![3.0, 3.0])
            .unwrap()
            .intersect_origin_ball(1.0)
            .unwrap();
        let q = r.project(&[3.0, 3.0]).unwrap();
        assert!(r.contains(&q).unwrap());
        // the nearest point lies on the unit circle
        assert!((q.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_regions() {
        let r = ConvexRegion::interval(1.0, f64::INFINITY)
            .intersect_origin_ball(0.5)
            .unwrap();
        assert!(r.certified_empty());
        assert!(matches!(r.project(&[0.0]), Err(QeqError::EmptyRegion)));
        assert_eq!(r.dist(&[0.0]).unwrap(), f64::INFINITY);
        let r2 = ConvexRegion::boxed(vec![2.0, 2.0], vec![3.0, 3.0])
            .unwrap()
            .intersect_origin_ball(1.0)
            .unwrap();
        assert!(r2.is_empty());
        assert!(ConvexRegion::ball(p(&[0.0]), 0.0).is_err());
    }

    #[test]
    fn grid_examples() {
        let unit = ConvexRegion::interval(0.0, 1.0);
        assert_eq!(
            unit.grid_points(0.5, 10.0).unwrap(),
            vec![p(&[0.0]), p(&[0.5]), p(&[1.0])]
        );
        let half_line = ConvexRegion::interval(1.0, f64::INFINITY);
        assert_eq!(
            half_line.grid_points(1.0, 2.5).unwrap(),
            vec![p(&[1.0]), p(&[2.0])]
        );
        let disk = ConvexRegion::origin_ball(2, 1.0).unwrap();
        assert_eq!(
            disk.grid_points(1.0, 2.0).unwrap(),
            vec![
                p(&[-1.0, 0.0]),
                p(&[0.0, -1.0]),
                p(&[0.0, 0.0]),
                p(&[0.0, 1.0]),
                p(&[1.0, 0.0])
            ]
        );
    }

    #[test]
    fn grid_guard() {
        let plane = ConvexRegion::whole(3);
        assert!(matches!(
            plane.grid_points(1e-3, 10.0),
            Err(QeqError::ExplosionGuard { .. })
        ));
    }

    #[test]
    fn escape_detection() {
        let z = ConvexRegion::interval(0.0, 8.0);
        let k = ConvexRegion::interval(1.0, f64::INFINITY);
        let q = k.escape_point(&z, 10.0, 0.5).unwrap().unwrap();
        assert!(!z.contains(&q).unwrap() && k.contains(&q).unwrap());
        let inner = ConvexRegion::origin_ball(2, 1.0).unwrap();
        let outer = ConvexRegion::boxed(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        assert!(inner.escape_point(&outer, 2.0, 0.1).unwrap().is_none());
        assert!(outer.escape_point(&inner, 2.0, 0.1).unwrap().is_some());
    }

    #[test]
    fn serde_roundtrip_with_infinite_bounds() {
        let r = ConvexRegion::interval(0.0, f64::INFINITY);
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(s, r#"{"dim":1,"lo":[0.0],"hi":["inf"]}"#);
        let back: ConvexRegion = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
        assert!(serde_json::from_str::<ConvexRegion>(r#"{"dim":1,"lo":[0.0],"hi":[1.0],"extra":1}"#).is_err());
        assert!(serde_json::from_str::<ConvexRegion>(r#"{"dim":2,"lo":[0.0],"hi":[1.0]}"#).is_err());
    }
}
