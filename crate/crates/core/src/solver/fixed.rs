//! Grid enumeration of fixed points `x ∈ K(x)`.

use serde::{Deserialize, Serialize};

use crate::error::{QeqError, Result};
use crate::linalg::Point;
use crate::map::SetValuedMap;
use crate::region::ConvexRegion;
use crate::solver::check::enclosing_radius;

/// Lattice points `x` with `dist(x, K(x)) ≤ h + tol`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSet {
    pub points: Vec<Point>,
    /// `project(K(x), x)` for each listed point when that projection is itself
    /// a grid-consistent fixed point, otherwise the point unchanged.
    pub polished: Vec<Point>,
    pub h: f64,
    pub tol: f64,
}

impl FixedPointSet {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }
}

pub fn fixed_point_set(k: &SetValuedMap, region: &ConvexRegion, h: f64, tol: f64) -> Result<FixedPointSet> {
    if !region.is_bounded() {
        return Err(QeqError::InvalidArgument(
            "fixed points are enumerated on bounded regions only".into(),
        ));
    }
    let bound = enclosing_radius(region)? + h;
    let slack = h + tol;
    let mut points = Vec::new();
    let mut polished = Vec::new();
    for x in region.grid_points(h, bound)? {
        let value = k.evaluate(&x)?;
        let q = match value.project(&x) {
            Ok(q) => q,
            Err(QeqError::EmptyRegion) | Err(QeqError::NonConvergence { .. }) => continue,
            Err(e) => return Err(e),
        };
        if q.dist(&x) > slack {
            continue;
        }
        let refined = if k.is_near_fixed(&q, slack)? { q } else { x.clone() };
        points.push(x);
        polished.push(refined);
    }
    Ok(FixedPointSet {
        points,
        polished,
        h,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::AffineClamp;

    #[test]
    fn e3_fixed_points_are_the_lattice_of_0_2() {
        let k = SetValuedMap::moving_box(
            1,
            vec![AffineClamp::new(vec![0.5], 0.0, 0.0, 1.0)],
            vec![AffineClamp::new(vec![0.5], 1.0, 1.0, 2.0)],
        )
        .unwrap();
        let fp = fixed_point_set(&k, &ConvexRegion::interval(0.0, 3.0), 0.01, 1e-9).unwrap();
        // x ≤ x/2 + 1 iff x ≤ 2; the first lattice point past 2 lies within h of K
        let xs: Vec<f64> = fp.points.iter().map(|p| p[0]).collect();
        assert!((xs[0] - 0.0).abs() < 1e-12);
        let last = *xs.last().unwrap();
        assert!(last <= 2.02 + 1e-9 && last >= 2.0 - 1e-9, "{last}");
        for q in &fp.polished {
            assert!(q[0] <= 2.0 + 1e-9);
        }
    }

    #[test]
    fn constant_and_singleton() {
        let c = ConvexRegion::interval(-1.0, 1.0);
        let fp = fixed_point_set(&SetValuedMap::constant(c.clone()), &c, 0.5, 1e-9).unwrap();
        assert_eq!(fp.len(), 5);
        let zero = SetValuedMap::constant(ConvexRegion::interval(0.0, 0.0));
        let fp0 = fixed_point_set(&zero, &c, 0.5, 1e-9).unwrap();
        // only the origin is within one lattice step
        assert!(fp0.points.contains(&Point(vec![0.0])));
        assert!(fp0.polished.iter().all(|p| p[0] == 0.0));
        assert!(fixed_point_set(&zero, &ConvexRegion::whole(1), 0.5, 1e-9).is_err());
    }
}
