//! Built-in instances: worked examples and negative controls.

use serde::Serialize;

use crate::bifunction::{Bifunction, BuiltinBifunction, QuadraticBifunction};
use crate::error::{QeqError, Result};
use crate::instance::{Numerics, ProblemInstance, ProblemKind};
use crate::linalg::Matrix;
use crate::map::{AffineClamp, AffineMap, BuiltinMap, SetValuedMap};
use crate::reductions::gnep::{Game, Player, QuadraticCost};
use crate::reductions::qvi::{BuiltinOperator, Operator};
use crate::region::ConvexRegion;

#[derive(Clone, Debug, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub kind: ProblemKind,
    pub summary: &'static str,
    /// Whether the entry demonstrates a failure path.
    pub control: bool,
}

const ENTRIES: &[CatalogEntry] = &[
    CatalogEntry {
        name: "tz-counterexample",
        kind: ProblemKind::Qep,
        summary: "C = [0,∞), K(x) = [1,∞), f(x,y) = y − x: coercive, yet no compact Z with K(W) ⊆ Z",
        control: false,
    },
    CatalogEntry {
        name: "e2-even",
        kind: ProblemKind::Qep,
        summary: "C = K(x) = [−1,1], f(x,y) = y² − x²; solution set {0}",
        control: false,
    },
    CatalogEntry {
        name: "e2-unbounded",
        kind: ProblemKind::Qep,
        summary: "C = K(x) = R, f(x,y) = y² − x², probe window 10; solution set {0}",
        control: false,
    },
    CatalogEntry {
        name: "e3-moving",
        kind: ProblemKind::Qep,
        summary: "C = [0,∞), K(x) = [clamp(x/2,0,1), clamp(x/2+1,1,2)], f(x,y) = (x−1)(y−x); solution {1}",
        control: false,
    },
    CatalogEntry {
        name: "e4-qvi",
        kind: ProblemKind::Qvi,
        summary: "T(x) = {x − 2}, K(x) = [0, clamp(1 + x/2, 1, 3)] on [0,∞); solution {2}",
        control: false,
    },
    CatalogEntry {
        name: "qvi-interval",
        kind: ProblemKind::Qvi,
        summary: "T(x) = co{x − 1, x + 1}, K(x) = C = [−2,2]; solution set [−1,1]",
        control: false,
    },
    CatalogEntry {
        name: "qvi-plane",
        kind: ProblemKind::Qvi,
        summary: "T(x) = {x − (1, 0.5)}, K(x) = [0, clamp(1 + x_i/2, 1, 3)] per axis on [0,∞)²; solution {(1, 0.5)}",
        control: false,
    },
    CatalogEntry {
        name: "e5-gnep",
        kind: ProblemKind::Gnep,
        summary: "θ_1 = (x¹)² − x¹x², θ_2 = (x²)² − x¹x², K_ν = [0, clamp(1 − x^{−ν}/2, 0, 1)]; equilibrium (0,0)",
        control: false,
    },
    CatalogEntry {
        name: "g2-shared",
        kind: ProblemKind::Gnep,
        summary: "θ_ν = (x^ν)² − 3x^ν, shared budget x¹ + x² ≤ 2; equilibria on the segment x¹ + x² = 2, x^ν ∈ [0.5, 1.5]",
        control: false,
    },
    CatalogEntry {
        name: "ctl-zero",
        kind: ProblemKind::Qep,
        summary: "f ≡ 0 on C = K(x) = [−1,1]: every fixed point solves",
        control: true,
    },
    CatalogEntry {
        name: "ctl-one",
        kind: ProblemKind::Qep,
        summary: "f ≡ 1 on C = K(x) = [−1,1]: not properly quasi-monotone, non-zero diagonal",
        control: true,
    },
    CatalogEntry {
        name: "ctl-far-dip",
        kind: ProblemKind::Qep,
        summary: "f(x,y) = min(0, 3 − |y|) on C = K(x) = [−10,10]: restricted solutions fail beyond radius 3",
        control: true,
    },
    CatalogEntry {
        name: "ctl-lsc-step",
        kind: ProblemKind::Qep,
        summary: "K(x) = {0} for x < 0, [0,1] for x ≥ 0: not lower semicontinuous at 0",
        control: true,
    },
    CatalogEntry {
        name: "ctl-nonclosed",
        kind: ProblemKind::Qep,
        summary: "K(x) = {1} for x ≤ 0, {0} for x > 0: graph not closed, no fixed point",
        control: true,
    },
    CatalogEntry {
        name: "ctl-sign-step",
        kind: ProblemKind::Qvi,
        summary: "T(x) = {sign step} on C = K(x) = [−1,1]: upper sign continuity fails at 0",
        control: true,
    },
    CatalogEntry {
        name: "ctl-concave",
        kind: ProblemKind::Qep,
        summary: "f(x,y) = −(y − x)² on C = K(x) = [0,1]: not quasiconvex in y, no upper sign property",
        control: true,
    },
    CatalogEntry {
        name: "ctl-clamp-abs",
        kind: ProblemKind::Qep,
        summary: "f(x,y) = min(|y|, 1) on C = K(x) = [−3,3]: quasiconvex but not semistrictly",
        control: true,
    },
    CatalogEntry {
        name: "ctl-pm-not-pqm",
        kind: ProblemKind::Qep,
        summary: "f(x,y) = x² − y² on C = K(x) = [−1,1]: pseudo-monotone but not properly quasi-monotone",
        control: true,
    },
];

pub fn entries() -> &'static [CatalogEntry] {
    ENTRIES
}

pub fn names() -> Vec<&'static str> {
    ENTRIES.iter().map(|e| e.name).collect()
}

/// Builds the named instance.
pub fn load(name: &str) -> Result<ProblemInstance> {
    let h1 = Numerics::new(0.01);
    let h2 = Numerics::new(0.05);
    let unit = ConvexRegion::interval(-1.0, 1.0);
    let half_line = ConvexRegion::interval(0.0, f64::INFINITY);
    match name {
        "tz-counterexample" => ProblemInstance::qep(
            name,
            half_line,
            SetValuedMap::constant(ConvexRegion::interval(1.0, f64::INFINITY)),
            linear_y_minus_x(),
            h1.with_rho(2.0),
        ),
        "e2-even" => constant_qep(name, unit, even(), h1.with_rho(1.0)),
        "e2-unbounded" => constant_qep(
            name,
            ConvexRegion::whole(1),
            even(),
            h1.with_rho(1.0).with_probe_radius(10.0),
        ),
        "e3-moving" => ProblemInstance::qep(name, half_line, e3_map()?, e3_bifunction(), h1.with_rho(3.0)),
        "e4-qvi" => {
            let k = SetValuedMap::moving_box(
                1,
                vec![AffineClamp::constant(1, 0.0)],
                vec![AffineClamp::new(vec![0.5], 1.0, 1.0, 3.0)],
            )?;
            let t = Operator::polytope(vec![AffineMap::new(Matrix::scalar(1.0), vec![-2.0])?])?;
            ProblemInstance::qvi(name, half_line, k, t, h1.with_rho(4.0))
        }
        "qvi-interval" => {
            let c = ConvexRegion::interval(-2.0, 2.0);
            let t = Operator::polytope(vec![
                AffineMap::new(Matrix::scalar(1.0), vec![-1.0])?,
                AffineMap::new(Matrix::scalar(1.0), vec![1.0])?,
            ])?;
            ProblemInstance::qvi(name, c.clone(), SetValuedMap::constant(c), t, h1.with_rho(2.0))
        }
        "qvi-plane" => {
            let upper = |i: usize| {
                let mut a = vec![0.0; 2];
                a[i] = 0.5;
                AffineClamp::new(a, 1.0, 1.0, 3.0)
            };
            let k = SetValuedMap::moving_box(
                2,
                vec![AffineClamp::constant(2, 0.0), AffineClamp::constant(2, 0.0)],
                vec![upper(0), upper(1)],
            )?;
            let t = Operator::polytope(vec![AffineMap::new(Matrix::identity(2), vec![-1.0, -0.5])?])?;
            let c = ConvexRegion::boxed(vec![0.0, 0.0], vec![f64::INFINITY, f64::INFINITY])?;
            ProblemInstance::qvi(name, c, k, t, h2.with_rho(2.0))
        }
        "e5-gnep" => ProblemInstance::gnep(name, e5_game(), h2.with_rho(3.0)),
        "g2-shared" => ProblemInstance::gnep(name, shared_budget_game(), h2.with_rho(3.0)),
        "ctl-zero" => constant_qep(name, unit, QuadraticBifunction::zero(1).into(), h1.with_rho(1.0)),
        "ctl-one" => constant_qep(name, unit, QuadraticBifunction::constant(1, 1.0).into(), h1.with_rho(1.0)),
        "ctl-far-dip" => constant_qep(
            name,
            ConvexRegion::interval(-10.0, 10.0),
            Bifunction::Builtin {
                name: BuiltinBifunction::FarDip,
            },
            h1.with_rho(2.0),
        ),
        "ctl-lsc-step" => ProblemInstance::qep(
            name,
            unit,
            SetValuedMap::Builtin {
                name: BuiltinMap::StepWiden,
            },
            QuadraticBifunction::zero(1).into(),
            h1.with_rho(1.0),
        ),
        "ctl-nonclosed" => ProblemInstance::qep(
            name,
            unit,
            SetValuedMap::Builtin {
                name: BuiltinMap::StepNonclosed,
            },
            QuadraticBifunction::zero(1).into(),
            h1.with_rho(2.0),
        ),
        "ctl-sign-step" => ProblemInstance::qvi(
            name,
            unit.clone(),
            SetValuedMap::constant(unit),
            Operator::Builtin {
                name: BuiltinOperator::SignStep,
            },
            h1.with_rho(1.0),
        ),
        "ctl-concave" => {
            // −(y − x)² = −x² − y² + 2xy
            let f = QuadraticBifunction {
                p: Matrix::scalar(-1.0),
                q: Matrix::scalar(-1.0),
                r: Matrix::scalar(2.0),
                ..QuadraticBifunction::zero(1)
            };
            constant_qep(name, ConvexRegion::interval(0.0, 1.0), f.into(), h1.with_rho(1.0))
        }
        "ctl-clamp-abs" => constant_qep(
            name,
            ConvexRegion::interval(-3.0, 3.0),
            Bifunction::Builtin {
                name: BuiltinBifunction::ClampNorm,
            },
            h1.with_rho(3.0),
        ),
        "ctl-pm-not-pqm" => {
            let f = QuadraticBifunction::difference_of(Matrix::scalar(-1.0), vec![0.0]);
            constant_qep(name, unit, f.into(), h1.with_rho(1.0))
        }
        other => Err(QeqError::InvalidArgument(format!("unknown catalog instance {other:?}"))),
    }
}

/// Loads every entry, in listing order.
pub fn load_all() -> Result<Vec<ProblemInstance>> {
    ENTRIES.iter().map(|e| load(e.name)).collect()
}

fn constant_qep(name: &str, c: ConvexRegion, f: Bifunction, numerics: Numerics) -> Result<ProblemInstance> {
    ProblemInstance::qep(name, c.clone(), SetValuedMap::constant(c), f, numerics)
}

fn even() -> Bifunction {
    QuadraticBifunction::difference_of(Matrix::scalar(1.0), vec![0.0]).into()
}

fn linear_y_minus_x() -> Bifunction {
    QuadraticBifunction {
        c: vec![-1.0],
        d: vec![1.0],
        ..QuadraticBifunction::zero(1)
    }
    .into()
}

fn e3_map() -> Result<SetValuedMap> {
    SetValuedMap::moving_box(
        1,
        vec![AffineClamp::new(vec![0.5], 0.0, 0.0, 1.0)],
        vec![AffineClamp::new(vec![0.5], 1.0, 1.0, 2.0)],
    )
}

/// `(x − 1)(y − x) = −x² + xy + x − y`.
fn e3_bifunction() -> Bifunction {
    QuadraticBifunction {
        p: Matrix::scalar(-1.0),
        r: Matrix::scalar(1.0),
        c: vec![1.0],
        d: vec![-1.0],
        ..QuadraticBifunction::zero(1)
    }
    .into()
}

fn two_player_game(costs: [QuadraticCost; 2], constraint: impl Fn() -> SetValuedMap) -> Game {
    let c = ConvexRegion::interval(0.0, f64::INFINITY);
    Game {
        players: costs
            .into_iter()
            .map(|cost| Player {
                dim: 1,
                cost,
                constraint: constraint(),
                strategy_set: c.clone(),
            })
            .collect(),
    }
}

fn e5_game() -> Game {
    let cost = |a: &[&[f64]]| QuadraticCost {
        a: Matrix::from_rows(a),
        b: vec![0.0, 0.0],
        c: 0.0,
    };
    two_player_game(
        [cost(&[&[1.0, -0.5], &[-0.5, 0.0]]), cost(&[&[0.0, -0.5], &[-0.5, 1.0]])],
        || rival_box(-0.5, 1.0, 1.0),
    )
}

/// `K_ν(x^{−ν}) = [0, clamp(a·x^{−ν} + b, 0, max)]`.
fn rival_box(a: f64, b: f64, max: f64) -> SetValuedMap {
    SetValuedMap::moving_box(
        1,
        vec![AffineClamp::constant(1, 0.0)],
        vec![AffineClamp::new(vec![a], b, 0.0, max)],
    )
    .expect("one-dimensional moving box")
}

fn shared_budget_game() -> Game {
    let cost = |i: usize| {
        let mut a = Matrix::zeros(2, 2);
        a.data[i * 2 + i] = 1.0;
        let mut b = vec![0.0; 2];
        b[i] = -3.0;
        QuadraticCost { a, b, c: 0.0 }
    };
    two_player_game([cost(0), cost(1)], || rival_box(-1.0, 2.0, 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_entry_loads_and_round_trips() {
        assert!(names().contains(&"tz-counterexample"));
        for e in entries() {
            let inst = load(e.name).unwrap();
            assert_eq!(inst.kind, e.kind, "{}", e.name);
            let text = inst.canonical_json();
            let back = ProblemInstance::from_json(&text).unwrap();
            assert_eq!(back, inst, "{}", e.name);
            assert_eq!(back.canonical_json(), text);
        }
        assert!(load("nope").is_err());
    }
}
