//! Generalized Nash games with quadratic costs and moving-box constraints.

use serde::{Deserialize, Serialize};

use crate::bifunction::Bifunction;
use crate::error::{check_dim, QeqError, Result};
use crate::linalg::{dot, Matrix, Point};
use crate::map::SetValuedMap;
use crate::region::ConvexRegion;
use crate::solver::check::{enclosing_radius, minimize_on};

/// `θ(x) = xᵀAx + bᵀx + c` on the full strategy vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticCost {
    pub a: Matrix,
    pub b: Vec<f64>,
    #[serde(default)]
    pub c: f64,
}

impl QuadraticCost {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.a.bilinear(x, x) + dot(&self.b, x) + self.c
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.a.symmetrized().mul_vec(x);
        for (gi, bi) in g.iter_mut().zip(&self.b) {
            *gi += bi;
        }
        g
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Player {
    pub dim: usize,
    pub cost: QuadraticCost,
    /// `K_ν`, evaluated at the rivals' strategies `x^{−ν}`.
    pub constraint: SetValuedMap,
    /// `C_ν`.
    pub strategy_set: ConvexRegion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Game {
    pub players: Vec<Player>,
}

/// A strategy vector split into player blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockPoint {
    pub blocks: Vec<Vec<f64>>,
}

impl BlockPoint {
    pub fn from_flat(sizes: &[usize], x: &[f64]) -> Result<Self> {
        check_dim(sizes.iter().sum(), x.len())?;
        let mut blocks = Vec::with_capacity(sizes.len());
        let mut off = 0;
        for s in sizes {
            blocks.push(x[off..off + s].to_vec());
            off += s;
        }
        Ok(BlockPoint { blocks })
    }

    pub fn to_flat(&self) -> Point {
        Point(self.blocks.concat())
    }
}

impl Game {
    pub fn dim(&self) -> usize {
        self.players.iter().map(|p| p.dim).sum()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.players.iter().map(|p| p.dim).collect()
    }

    fn offset(&self, nu: usize) -> usize {
        self.players[..nu].iter().map(|p| p.dim).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.players.is_empty() {
            return Err(QeqError::Schema("a game needs at least one player".into()));
        }
        let n = self.dim();
        for (nu, p) in self.players.iter().enumerate() {
            if p.dim == 0 {
                return Err(QeqError::Schema(format!("player {nu} has an empty block")));
            }
            p.cost.a.validate()?;
            p.cost.a.check_shape(n, n)?;
            check_dim(n, p.cost.b.len())?;
            p.constraint.validate_shape()?;
            check_dim(p.dim, p.constraint.output_dim())?;
            if let Some(d) = p.constraint.input_dim() {
                check_dim(n - p.dim, d)?;
            }
            check_dim(p.dim, p.strategy_set.dim())?;
        }
        Ok(())
    }

    /// The block of player `nu`.
    pub fn block<'a>(&self, x: &'a [f64], nu: usize) -> &'a [f64] {
        let off = self.offset(nu);
        &x[off..off + self.players[nu].dim]
    }

    /// `x^{−ν}`: all blocks except player `nu`'s, in order.
    pub fn complement(&self, x: &[f64], nu: usize) -> Vec<f64> {
        let off = self.offset(nu);
        x[..off].iter().chain(&x[off + self.players[nu].dim..]).copied().collect()
    }

    /// `(z, x^{−ν})` as a flat vector.
    pub fn with_block(&self, x: &[f64], nu: usize, z: &[f64]) -> Vec<f64> {
        let off = self.offset(nu);
        let mut out = x.to_vec();
        out[off..off + z.len()].copy_from_slice(z);
        out
    }

    /// Inverse of [`Game::complement`]: inserts `z` as player `nu`'s block.
    pub fn assemble(&self, x_minus: &[f64], nu: usize, z: &[f64]) -> Vec<f64> {
        let off = self.offset(nu);
        let mut out = Vec::with_capacity(self.dim());
        out.extend_from_slice(&x_minus[..off]);
        out.extend_from_slice(z);
        out.extend_from_slice(&x_minus[off..]);
        out
    }

    /// `Σ_ν θ_ν(y^ν, x^{−ν}) − θ_ν(x)`.
    pub fn nikaido_isoda(&self, x: &[f64], y: &[f64]) -> f64 {
        self.players
            .iter()
            .enumerate()
            .map(|(nu, p)| {
                let z = self.with_block(x, nu, self.block(y, nu));
                p.cost.eval(&z) - p.cost.eval(x)
            })
            .sum()
    }

    /// Gradient in `y`: block `ν` is `∇_ν θ_ν(y^ν, x^{−ν})`.
    pub fn nikaido_isoda_grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut g = Vec::with_capacity(self.dim());
        for (nu, p) in self.players.iter().enumerate() {
            let z = self.with_block(x, nu, self.block(y, nu));
            let full = p.cost.grad(&z);
            g.extend_from_slice(self.block(&full, nu));
        }
        g
    }

    /// `K(x) = ∏ K_ν(x^{−ν})`.
    pub fn constraint_map(&self) -> SetValuedMap {
        SetValuedMap::Product {
            blocks: self.sizes(),
            maps: self.players.iter().map(|p| p.constraint.clone()).collect(),
        }
    }

    /// `C = ∏ C_ν`.
    pub fn strategy_region(&self) -> Result<ConvexRegion> {
        let parts: Vec<ConvexRegion> = self.players.iter().map(|p| p.strategy_set.clone()).collect();
        ConvexRegion::product(&parts)
    }

    /// Smallest eigenvalue of the symmetric own-block part of `A_ν`.
    pub fn own_block_min_eigenvalue(&self, nu: usize) -> f64 {
        let off = self.offset(nu);
        let idx: Vec<usize> = (off..off + self.players[nu].dim).collect();
        self.players[nu].cost.a.submatrix(&idx, &idx).min_symmetric_eigenvalue()
    }
}

/// `f^{NI}` for `game`.
pub fn nikaido_isoda(game: &Game) -> Bifunction {
    Bifunction::NikaidoIsoda { game: game.clone() }
}

/// `x ↦ ∏ K_ν(x^{−ν})`.
pub fn product_map(game: &Game) -> SetValuedMap {
    game.constraint_map()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestResponse {
    /// Minimum of `θ_ν(·, x^{−ν})` over `K_ν(x^{−ν})`.
    pub value: f64,
    pub minimizer: Point,
    /// Lattice points of `K_ν(x^{−ν})` within `tol` of the minimum.
    pub argmins: Vec<Point>,
}

/// Minimises player `nu`'s cost over `K_ν(x_minus) ∩ B̄_window`.
///
/// The lattice minimum seeds an exact projected coordinate descent on box
/// values (closed-form steps, costs are quadratic); other values fall back to
/// projected gradient descent.
pub fn best_response(
    game: &Game,
    nu: usize,
    x_minus: &[f64],
    h: f64,
    tol: f64,
    window: f64,
) -> Result<BestResponse> {
    let player = game
        .players
        .get(nu)
        .ok_or_else(|| QeqError::InvalidArgument(format!("no player {nu}")))?;
    check_dim(game.dim() - player.dim, x_minus.len())?;
    let value_set = player.constraint.evaluate(x_minus)?;
    if value_set.is_empty() {
        return Err(QeqError::EmptyConstraint { player: nu });
    }
    let region = value_set.intersect_origin_ball(window)?;
    if region.is_empty() {
        return Err(QeqError::EmptyConstraint { player: nu });
    }
    let cost = |z: &[f64]| player.cost.eval(&game.assemble(x_minus, nu, z));
    let grad = |z: &[f64]| {
        let full = game.assemble(x_minus, nu, z);
        game.block(&player.cost.grad(&full), nu).to_vec()
    };
    let hint = vec![0.0; player.dim];
    let (mut z, mut v) = minimize_on(&region, h, &hint, cost, grad)?.ok_or(QeqError::EmptyConstraint { player: nu })?;
    if value_set.is_box_only() {
        let (lo, hi) = value_set.bounding_box();
        let lo: Vec<f64> = lo.iter().map(|l| l.max(-window)).collect();
        let hi: Vec<f64> = hi.iter().map(|u| u.min(window)).collect();
        let (cz, cv) = coordinate_descent(game, nu, x_minus, &lo, &hi, z.clone());
        if cv <= v {
            z = cz;
            v = cv;
        }
    }
    let bound = enclosing_radius(&region)? + h;
    let argmins = region
        .grid_points(h, bound)?
        .into_iter()
        .filter(|p| cost(p) <= v + tol)
        .collect();
    Ok(BestResponse {
        value: v,
        minimizer: z,
        argmins,
    })
}

fn coordinate_descent(game: &Game, nu: usize, x_minus: &[f64], lo: &[f64], hi: &[f64], start: Point) -> (Point, f64) {
    let cost = &game.players[nu].cost;
    let off = game.offset(nu);
    let n = game.dim();
    let mut full = game.assemble(x_minus, nu, &start);
    for _ in 0..1000 {
        let mut change: f64 = 0.0;
        for i in 0..start.dim() {
            let g = off + i;
            let aii = cost.a.get(g, g);
            let lin: f64 = (0..n)
                .filter(|&j| j != g)
                .map(|j| (cost.a.get(g, j) + cost.a.get(j, g)) * full[j])
                .sum::<f64>()
                + cost.b[g];
            let target = if aii > 1e-15 {
                -lin / (2.0 * aii)
            } else if lin > 0.0 {
                lo[i]
            } else if lin < 0.0 {
                hi[i]
            } else {
                full[g]
            };
            let next = target.clamp(lo[i], hi[i]);
            change = change.max((next - full[g]).abs());
            full[g] = next;
        }
        if change < 1e-15 {
            break;
        }
    }
    let z = Point(game.block(&full, nu).to_vec());
    let v = cost.eval(&full);
    (z, v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayerCertificate {
    pub own_cost: f64,
    pub best_value: f64,
    pub best_point: Point,
    /// `θ_ν(x̂) − min θ_ν(·, x̂^{−ν})`.
    pub regret: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnepCheck {
    pub ok: bool,
    pub feasible: bool,
    pub infeasibility: f64,
    pub players: Vec<PlayerCertificate>,
}

/// Tests `x̂^ν ∈ Sol_ν(x̂^{−ν})` for every player.
///
/// Feasibility uses the same grid-consistent rule as the QEP check,
/// `dist(x̂, ∏K_ν(x̂^{−ν})) ≤ h + tol_feas`; optimality requires every regret
/// to be at most `tol`.
pub fn check_gnep_equilibrium(
    game: &Game,
    xhat: &[f64],
    h: f64,
    tol_feas: f64,
    tol: f64,
    window: f64,
) -> Result<GnepCheck> {
    check_dim(game.dim(), xhat.len())?;
    let d = game.constraint_map().evaluate(xhat)?.dist(xhat)?;
    if d > h + tol_feas {
        return Ok(GnepCheck {
            ok: false,
            feasible: false,
            infeasibility: d,
            players: Vec::new(),
        });
    }
    let mut players = Vec::with_capacity(game.players.len());
    let mut ok = true;
    for (nu, p) in game.players.iter().enumerate() {
        let br = best_response(game, nu, &game.complement(xhat, nu), h, tol, window)?;
        let own = p.cost.eval(xhat);
        let regret = own - br.value;
        ok &= regret <= tol;
        players.push(PlayerCertificate {
            own_cost: own,
            best_value: br.value,
            best_point: br.minimizer,
            regret,
        });
    }
    Ok(GnepCheck {
        ok,
        feasible: true,
        infeasibility: d,
        players,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::AffineClamp;

    /// θ_1 = (x¹)² − x¹x², θ_2 = (x²)² − x¹x², K_ν = [0, clamp(1 − x^{−ν}/2, 0, 1)].
    pub(crate) fn e5() -> Game {
        let k = || {
            SetValuedMap::moving_box(
                1,
                vec![AffineClamp::constant(1, 0.0)],
                vec![AffineClamp::new(vec![-0.5], 1.0, 0.0, 1.0)],
            )
            .unwrap()
        };
        let c = ConvexRegion::interval(0.0, f64::INFINITY);
        Game {
            players: vec![
                Player {
                    dim: 1,
                    cost: QuadraticCost {
                        a: Matrix::from_rows(&[&[1.0, -0.5], &[-0.5, 0.0]]),
                        b: vec![0.0, 0.0],
                        c: 0.0,
                    },
                    constraint: k(),
                    strategy_set: c.clone(),
                },
                Player {
                    dim: 1,
                    cost: QuadraticCost {
                        a: Matrix::from_rows(&[&[0.0, -0.5], &[-0.5, 1.0]]),
                        b: vec![0.0, 0.0],
                        c: 0.0,
                    },
                    constraint: k(),
                    strategy_set: c,
                },
            ],
        }
    }

    #[test]
    fn nikaido_isoda_examples() {
        let g = e5();
        g.validate().unwrap();
        assert_eq!(g.nikaido_isoda(&[0.0, 0.0], &[1.0, 1.0]), 2.0);
        for x in [[0.3, 0.9], [1.0, -2.0]] {
            assert_eq!(g.nikaido_isoda(&x, &x), 0.0);
        }
    }

    #[test]
    fn product_map_examples() {
        let k = e5().constraint_map();
        assert_eq!(k.evaluate(&[0.0, 0.0]).unwrap().bounding_box(), (vec![0.0, 0.0], vec![1.0, 1.0]));
        assert_eq!(k.evaluate(&[1.0, 1.0]).unwrap().bounding_box(), (vec![0.0, 0.0], vec![0.5, 0.5]));
    }

    #[test]
    fn best_response_examples() {
        let g = e5();
        let br = best_response(&g, 0, &[1.0], 0.05, 1e-9, 10.0).unwrap();
        assert!((br.minimizer[0] - 0.5).abs() < 1e-12);
        assert!((br.value + 0.25).abs() < 1e-12);
        let br0 = best_response(&g, 0, &[0.0], 0.05, 1e-9, 10.0).unwrap();
        assert_eq!(br0.minimizer, Point(vec![0.0]));
        assert_eq!(br0.argmins, vec![Point(vec![0.0])]);
    }

    #[test]
    fn equilibrium_examples() {
        let g = e5();
        assert!(check_gnep_equilibrium(&g, &[0.0, 0.0], 0.05, 1e-9, 1e-6, 10.0).unwrap().ok);
        let half = check_gnep_equilibrium(&g, &[0.5, 0.5], 0.05, 1e-9, 1e-6, 10.0).unwrap();
        assert!(!half.ok);
        assert!((half.players[0].best_point[0] - 0.25).abs() < 1e-12);
        assert!(!check_gnep_equilibrium(&g, &[3.0, 0.0], 0.05, 1e-9, 1e-6, 10.0).unwrap().feasible);
    }

    #[test]
    fn block_roundtrip() {
        let bp = BlockPoint::from_flat(&[2, 1], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(bp.blocks, vec![vec![1.0, 2.0], vec![3.0]]);
        assert_eq!(bp.to_flat(), Point(vec![1.0, 2.0, 3.0]));
    }
}
