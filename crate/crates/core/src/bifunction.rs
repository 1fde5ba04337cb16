//! Equilibrium bifunctions `f : R^n × R^n → R`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};
use crate::linalg::{dot, norm, Matrix};
use crate::reductions::gnep::Game;
use crate::reductions::qvi::Operator;

/// `f(x,y) = xᵀPx + yᵀQy + xᵀRy + cᵀx + dᵀy + e`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticBifunction {
    pub p: Matrix,
    pub q: Matrix,
    pub r: Matrix,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub e: f64,
}

impl QuadraticBifunction {
    pub fn zero(n: usize) -> Self {
        QuadraticBifunction {
            p: Matrix::zeros(n, n),
            q: Matrix::zeros(n, n),
            r: Matrix::zeros(n, n),
            c: vec![0.0; n],
            d: vec![0.0; n],
            e: 0.0,
        }
    }

    /// `f ≡ e`.
    pub fn constant(n: usize, e: f64) -> Self {
        QuadraticBifunction {
            e,
            ..QuadraticBifunction::zero(n)
        }
    }

    /// `f(x,y) = g(y) − g(x)` for `g(s) = sᵀAs + bᵀs`.
    pub fn difference_of(a: Matrix, b: Vec<f64>) -> Self {
        let n = b.len();
        let mut neg = a.clone();
        neg.data.iter_mut().for_each(|v| *v = -*v);
        QuadraticBifunction {
            p: neg,
            q: a,
            r: Matrix::zeros(n, n),
            c: b.iter().map(|v| -v).collect(),
            d: b,
            e: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        for m in [&self.p, &self.q, &self.r] {
            m.validate()?;
            m.check_shape(n, n)?;
        }
        check_dim(n, self.d.len())
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.p.bilinear(x, x)
            + self.q.bilinear(y, y)
            + self.r.bilinear(x, y)
            + dot(&self.c, x)
            + dot(&self.d, y)
            + self.e
    }

    /// `∇_y f = (Q + Qᵀ) y + Rᵀ x + d`.
    pub fn grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let qy = self.q.symmetrized().mul_vec(y);
        let rx = self.r.mul_vec_transposed(x);
        qy.iter()
            .zip(&rx)
            .zip(&self.d)
            .map(|((a, b), c)| a + b + c)
            .collect()
    }
}

/// Hand-written bifunctions used as controls.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinBifunction {
    /// `min(‖y‖, 1)`: quasiconvex in `y` but flat beyond the unit sphere.
    ClampNorm,
    /// `min(0, 3 − ‖y‖)`: zero near the origin, negative for `‖y‖ > 3`.
    FarDip,
}

impl BuiltinBifunction {
    fn eval(self, _x: &[f64], y: &[f64]) -> f64 {
        match self {
            BuiltinBifunction::ClampNorm => norm(y).min(1.0),
            BuiltinBifunction::FarDip => (3.0 - norm(y)).min(0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Bifunction {
    Quadratic(QuadraticBifunction),
    /// `f_T(x,y) = max_{x* ∈ T(x)} ⟨x*, y − x⟩`.
    Qvi { operator: Operator },
    /// `Σ_ν θ_ν(y^ν, x^{−ν}) − θ_ν(x)`.
    NikaidoIsoda { game: Game },
    Builtin { name: BuiltinBifunction },
}

impl From<QuadraticBifunction> for Bifunction {
    fn from(q: QuadraticBifunction) -> Self {
        Bifunction::Quadratic(q)
    }
}

impl Bifunction {
    /// Dimension the bifunction is tied to, `None` for dimension-free builtins.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Bifunction::Quadratic(q) => Some(q.dim()),
            Bifunction::Qvi { operator } => operator.dim(),
            Bifunction::NikaidoIsoda { game } => Some(game.dim()),
            Bifunction::Builtin { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Bifunction::Quadratic(q) => q.validate(),
            Bifunction::Qvi { operator } => operator.validate(),
            Bifunction::NikaidoIsoda { game } => game.validate(),
            Bifunction::Builtin { .. } => Ok(()),
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Bifunction::Quadratic(q) => q.eval(x, y),
            Bifunction::Qvi { operator } => operator.gap(x, y),
            Bifunction::NikaidoIsoda { game } => game.nikaido_isoda(x, y),
            Bifunction::Builtin { name } => name.eval(x, y),
        }
    }

    /// Evaluation with dimension checks.
    pub fn eval_checked(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dim(x.len(), y.len())?;
        if let Some(n) = self.dim() {
            check_dim(n, x.len())?;
        }
        Ok(self.eval(x, y))
    }

    /// A (sub)gradient of `y ↦ f(x,y)`.
    pub fn grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        match self {
            Bifunction::Quadratic(q) => q.grad_y(x, y),
            Bifunction::Qvi { operator } => operator.gap_grad_y(x, y),
            Bifunction::NikaidoIsoda { game } => game.nikaido_isoda_grad_y(x, y),
            Bifunction::Builtin { .. } => {
                let step = 1e-6;
                let mut y1 = y.to_vec();
                (0..y.len())
                    .map(|i| {
                        y1[i] = y[i] + step;
                        let up = self.eval(x, &y1);
                        y1[i] = y[i] - step;
                        let down = self.eval(x, &y1);
                        y1[i] = y[i];
                        (up - down) / (2.0 * step)
                    })
                    .collect()
            }
        }
    }

    pub fn operator(&self) -> Option<&Operator> {
        match self {
            Bifunction::Qvi { operator } => Some(operator),
            _ => None,
        }
    }

    pub fn game(&self) -> Option<&Game> {
        match self {
            Bifunction::NikaidoIsoda { game } => Some(game),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn even() -> Bifunction {
        // y² − x²
        QuadraticBifunction::difference_of(Matrix::scalar(1.0), vec![0.0]).into()
    }

    #[test]
    fn quadratic_examples() {
        assert_eq!(even().eval(&[1.0], &[2.0]), 3.0);
        // (x − 1)(y − x) = −x² + xy + x − y
        let f = Bifunction::Quadratic(QuadraticBifunction {
            p: Matrix::scalar(-1.0),
            r: Matrix::scalar(1.0),
            c: vec![1.0],
            d: vec![-1.0],
            ..QuadraticBifunction::zero(1)
        });
        for y in [-5.0, 0.0, 0.3, 9.0] {
            assert!(f.eval(&[1.0], &[y]).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_differences() {
        let f = Bifunction::Quadratic(QuadraticBifunction {
            p: Matrix::from_rows(&[&[1.0, 2.0], &[0.0, -1.0]]),
            q: Matrix::from_rows(&[&[2.0, 1.0], &[0.0, 3.0]]),
            r: Matrix::from_rows(&[&[0.5, -1.0], &[4.0, 0.0]]),
            c: vec![1.0, 0.0],
            d: vec![-2.0, 0.5],
            e: 0.25,
        });
        let x = [0.3, -1.2];
        let y = [1.1, 0.4];
        let g = f.grad_y(&x, &y);
        for i in 0..2 {
            let mut yp = y;
            let mut ym = y;
            yp[i] += 1e-6;
            ym[i] -= 1e-6;
            let fd = (f.eval(&x, &yp) - f.eval(&x, &ym)) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-6, "{fd} vs {}", g[i]);
        }
    }

    #[test]
    fn builtins() {
        let clamp = Bifunction::Builtin {
            name: BuiltinBifunction::ClampNorm,
        };
        assert_eq!(clamp.eval(&[0.0], &[2.0]), 1.0);
        assert_eq!(clamp.eval(&[0.0], &[-0.5]), 0.5);
        let dip = Bifunction::Builtin {
            name: BuiltinBifunction::FarDip,
        };
        assert_eq!(dip.eval(&[0.0], &[1.0]), 0.0);
        assert_eq!(dip.eval(&[0.0], &[3.5]), -0.5);
        assert!((dip.grad_y(&[0.0], &[3.5])[0] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn serde_roundtrip() {
        let f = even();
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.starts_with(r#"{"type":"quadratic""#));
        let back: Bifunction = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
        let b: Bifunction = serde_json::from_str(r#"{"type":"builtin","name":"far_dip"}"#).unwrap();
        assert_eq!(b.dim(), None);
    }
}
