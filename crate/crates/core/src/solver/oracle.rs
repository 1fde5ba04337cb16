//! Brute-force double loop over the lattice, used as ground truth.

use crate::bifunction::Bifunction;
use crate::error::{QeqError, Result};
use crate::linalg::Point;
use crate::map::SetValuedMap;
use crate::region::ConvexRegion;
use crate::solver::check::enclosing_radius;

/// Lattice points `x` of `region` with `dist(x, K(x)) ≤ h + tol_feas` and
/// `f(x,y) ≥ −tol` for every lattice `y ∈ K(x) ∩ region`.
pub fn oracle_enumerate(
    k: &SetValuedMap,
    f: &Bifunction,
    region: &ConvexRegion,
    h: f64,
    tol_feas: f64,
    tol: f64,
) -> Result<Vec<Point>> {
    if !region.is_bounded() {
        return Err(QeqError::InvalidArgument("oracle region must be bounded".into()));
    }
    let bound = enclosing_radius(region)? + h;
    let mut out = Vec::new();
    for x in region.grid_points(h, bound)? {
        let value = k.evaluate(&x)?;
        if value.dist(&x)? > h + tol_feas {
            continue;
        }
        // same lattice as the x loop, restricted to K(x) ∩ region
        let ys = value.intersect(region)?.grid_points(h, bound)?;
        let ok = ys.iter().all(|y| f.eval(&x, y) >= -tol);
        if ok {
            out.push(x);
        }
    }
    Ok(out)
}
