//! Pointwise solution checks for QEP and its Minty dual.

use serde::{Deserialize, Serialize};

use crate::bifunction::Bifunction;
use crate::error::{QeqError, Result};
use crate::linalg::{norm, Point};
use crate::map::SetValuedMap;
use crate::region::ConvexRegion;

/// Number of projected-descent steps applied after the grid search.
pub const POLISH_STEPS: usize = 20;

/// Grid spacing and tolerances shared by the checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckParams {
    pub h: f64,
    /// Accepted `dist(x, K(x))` for a point to count as feasible.
    pub feas_tol: f64,
    /// Accepted violation of the equilibrium inequality.
    pub tol: f64,
}

impl CheckParams {
    /// Grid-consistent feasibility: `dist(x, K(x)) ≤ h + tol_feas`.
    pub fn grid(h: f64, tol_feas: f64, tol: f64) -> Self {
        CheckParams {
            h,
            feas_tol: h + tol_feas,
            tol,
        }
    }
}

/// Outcome of a solution check, with the extremal `y` as certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionCheck {
    pub ok: bool,
    pub feasible: bool,
    pub infeasibility: f64,
    /// `min_y f(x0,y)` for the QEP check, `max_y f(y,x0)` for the Minty check.
    pub value: Option<f64>,
    pub argument: Option<Point>,
}

impl SolutionCheck {
    fn infeasible(d: f64) -> Self {
        SolutionCheck {
            ok: false,
            feasible: false,
            infeasibility: d,
            value: None,
            argument: None,
        }
    }
}

/// Radius of the smallest origin ball containing `region`; errors if unbounded.
pub(crate) fn enclosing_radius(region: &ConvexRegion) -> Result<f64> {
    let (lo, hi) = region.bounding_box();
    let far: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| l.abs().max(h.abs())).collect();
    let r = norm(&far);
    if r.is_finite() {
        Ok(r)
    } else {
        Err(QeqError::InvalidArgument("region must be bounded".into()))
    }
}

/// Grid minimum of `obj` over `region`, refined by projected descent.
///
/// The lattice is the one of spacing `h` anchored at the origin. When no lattice
/// point falls inside a non-empty region the search starts from the projection
/// of `hint`. Returns `None` for an empty region.
pub fn minimize_on<F, G>(
    region: &ConvexRegion,
    h: f64,
    hint: &[f64],
    obj: F,
    grad: G,
) -> Result<Option<(Point, f64)>>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    if region.is_empty() {
        return Ok(None);
    }
    let bound = enclosing_radius(region)? + h;
    let mut best: Option<(Point, f64)> = None;
    for y in region.grid_points(h, bound)? {
        let v = obj(&y);
        if best.as_ref().is_none_or(|(_, b)| v < *b) {
            best = Some((y, v));
        }
    }
    let (mut y, mut v) = match best {
        Some(b) => b,
        None => {
            let y = region.project(hint)?;
            let v = obj(&y);
            (y, v)
        }
    };
    let mut step = 1.0;
    for _ in 0..POLISH_STEPS {
        let g = grad(&y);
        if norm(&g) == 0.0 || !g.iter().all(|c| c.is_finite()) {
            break;
        }
        let mut improved = false;
        for _ in 0..40 {
            let trial: Vec<f64> = y.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            let cand = region.project(&trial)?;
            let cv = obj(&cand);
            if cv < v {
                y = cand;
                v = cv;
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
    Ok(Some((y, v)))
}

/// Tests `x0 ∈ K(x0)` and `f(x0, y) ≥ −tol` for every `y ∈ K(x0) ∩ window`.
pub fn check_qep_solution(
    k: &SetValuedMap,
    f: &Bifunction,
    x0: &[f64],
    window: &ConvexRegion,
    params: CheckParams,
) -> Result<SolutionCheck> {
    let value = k.evaluate(x0)?;
    let d = value.dist(x0)?;
    if d > params.feas_tol {
        return Ok(SolutionCheck::infeasible(d));
    }
    let search = value.intersect(window)?;
    let found = minimize_on(&search, params.h, x0, |y| f.eval(x0, y), |y| f.grad_y(x0, y))?;
    Ok(match found {
        Some((y, v)) => SolutionCheck {
            ok: v >= -params.tol,
            feasible: true,
            infeasibility: d,
            value: Some(v),
            argument: Some(y),
        },
        None => SolutionCheck {
            ok: true,
            feasible: true,
            infeasibility: d,
            value: None,
            argument: None,
        },
    })
}

/// Tests `x0 ∈ K(x0)` and `f(y, x0) ≤ tol` for every `y ∈ K(x0) ∩ window`.
pub fn check_mqep_solution(
    k: &SetValuedMap,
    f: &Bifunction,
    x0: &[f64],
    window: &ConvexRegion,
    params: CheckParams,
) -> Result<SolutionCheck> {
    let value = k.evaluate(x0)?;
    let d = value.dist(x0)?;
    if d > params.feas_tol {
        return Ok(SolutionCheck::infeasible(d));
    }
    let search = value.intersect(window)?;
    let neg = |y: &[f64]| -f.eval(y, x0);
    let grad = |y: &[f64]| {
        let step = 1e-6;
        let mut y1 = y.to_vec();
        (0..y.len())
            .map(|i| {
                y1[i] = y[i] + step;
                let up = neg(&y1);
                y1[i] = y[i] - step;
                let down = neg(&y1);
                y1[i] = y[i];
                (up - down) / (2.0 * step)
            })
            .collect()
    };
    let found = minimize_on(&search, params.h, x0, neg, grad)?;
    Ok(match found {
        Some((y, v)) => SolutionCheck {
            ok: -v <= params.tol,
            feasible: true,
            infeasibility: d,
            value: Some(-v),
            argument: Some(y),
        },
        None => SolutionCheck {
            ok: true,
            feasible: true,
            infeasibility: d,
            value: None,
            argument: None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bifunction::QuadraticBifunction;
    use crate::linalg::Matrix;
    use crate::map::AffineClamp;

    fn e3() -> (SetValuedMap, Bifunction) {
        let k = SetValuedMap::moving_box(
            1,
            vec![AffineClamp::new(vec![0.5], 0.0, 0.0, 1.0)],
            vec![AffineClamp::new(vec![0.5], 1.0, 1.0, 2.0)],
        )
        .unwrap();
        let f = Bifunction::Quadratic(QuadraticBifunction {
            p: Matrix::scalar(-1.0),
            r: Matrix::scalar(1.0),
            c: vec![1.0],
            d: vec![-1.0],
            ..QuadraticBifunction::zero(1)
        });
        (k, f)
    }

    #[test]
    fn e3_checks() {
        let (k, f) = e3();
        let window = ConvexRegion::origin_ball(1, 6.0).unwrap();
        let params = CheckParams::grid(0.01, 1e-9, 1e-6);
        assert!(check_qep_solution(&k, &f, &[1.0], &window, params).unwrap().ok);
        let at0 = check_qep_solution(&k, &f, &[0.0], &window, params).unwrap();
        assert!(!at0.ok && at0.feasible);
        // f(0, y) = −y, minimised at the upper end y = 1 of K(0) = [0, 1]
        assert!((at0.value.unwrap() + 1.0).abs() < 1e-9);
        let far = check_qep_solution(&k, &f, &[2.5], &window, params).unwrap();
        assert!(!far.ok && !far.feasible);
    }

    #[test]
    fn minty_checks_on_even_function() {
        let c = ConvexRegion::interval(-1.0, 1.0);
        let k = SetValuedMap::constant(c);
        let f: Bifunction = QuadraticBifunction::difference_of(Matrix::scalar(1.0), vec![0.0]).into();
        let window = ConvexRegion::origin_ball(1, 2.0).unwrap();
        let params = CheckParams::grid(0.01, 1e-9, 1e-6);
        // f(y, x0) = x0² − y², so the Minty set is {0}
        assert!(check_mqep_solution(&k, &f, &[0.0], &window, params).unwrap().ok);
        let at1 = check_mqep_solution(&k, &f, &[1.0], &window, params).unwrap();
        assert!(!at1.ok);
        assert_eq!(at1.argument.unwrap(), Point(vec![0.0]));
        let zero: Bifunction = QuadraticBifunction::zero(1).into();
        for x in [-1.0, 0.3, 1.0] {
            assert!(check_mqep_solution(&k, &zero, &[x], &window, params).unwrap().ok);
        }
    }

    #[test]
    fn descent_reaches_off_grid_minimum() {
        // min of (y − 0.123)² on [0, 1] sits between lattice points
        let r = ConvexRegion::interval(0.0, 1.0);
        let (y, v) = minimize_on(
            &r,
            0.1,
            &[0.0],
            |y| (y[0] - 0.123).powi(2),
            |y| vec![2.0 * (y[0] - 0.123)],
        )
        .unwrap()
        .unwrap();
        assert!((y[0] - 0.123).abs() < 1e-6 && v < 1e-10);
    }
}
