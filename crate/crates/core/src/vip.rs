//! Variational inequalities `VIP(S, C)`: find `x* in C` with
//! `<S x*, x - x*> >= 0` for every `x in C`.
//!
//! For `gamma > 0` the solutions are exactly the fixed points of
//! `P_C(I - gamma S)`, which [`solve_vip`] approximates with the averaged
//! iteration `x_{n+1} = (1 - lambda) x_n + lambda P_C(x_n - gamma S x_n)`.
//!
//! All projections are nearest-point projections in the inner product of the
//! ambient [`WeightedSpace`]. For Euclidean spaces they reduce to the usual
//! formulas.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iterate::{self, FixedPointResult, IterationConfig};
use crate::operators::{Operator, SelfMap};
use crate::space::{Vector, WeightedSpace};

/// Half-width of the box patch used to sample from a halfspace.
pub const HALFSPACE_PATCH: f64 = 10.0;

/// Tolerance on `x* in C` required by [`vi_residual`].
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ConvexSet {
    Ball { center: Vector, radius: f64 },
    Box { lo: Vector, hi: Vector },
    /// `{x : <normal, x> <= offset}`.
    Halfspace { normal: Vector, offset: f64 },
    /// `{x >= 0 : sum_i x_i = 1}`.
    Simplex { dim: usize },
}

impl ConvexSet {
    pub fn unit_ball(dim: usize) -> Self {
        ConvexSet::Ball { center: Vector::zeros(dim), radius: 1.0 }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::Ball { center, .. } => center.dim(),
            ConvexSet::Box { lo, .. } => lo.dim(),
            ConvexSet::Halfspace { normal, .. } => normal.dim(),
            ConvexSet::Simplex { dim } => *dim,
        }
    }

    pub fn validate(&self, space: &WeightedSpace) -> Result<()> {
        if self.dim() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: self.dim() });
        }
        match self {
            ConvexSet::Ball { center, radius } => {
                if !(radius.is_finite() && *radius > 0.0) || !center.is_finite() {
                    return Err(Error::param(format!("ball radius must be positive, got {radius}")));
                }
            }
            ConvexSet::Box { lo, hi } => {
                space.check(hi)?;
                let ordered = lo.coords().iter().zip(hi.coords()).all(|(l, h)| l <= h);
                if !ordered || !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::param("box requires finite lo <= hi componentwise"));
                }
            }
            ConvexSet::Halfspace { normal, offset } => {
                if !normal.is_finite() || !offset.is_finite() || space.norm_unchecked(normal) <= 0.0 {
                    return Err(Error::param("halfspace normal must be finite and nonzero"));
                }
            }
            ConvexSet::Simplex { .. } => {}
        }
        Ok(())
    }

    /// Nearest point of the set to `x`.
    pub fn project(&self, space: &WeightedSpace, x: &Vector) -> Result<Vector> {
        self.validate(space)?;
        space.check(x)?;
        Ok(self.project_unchecked(space, x))
    }

    pub(crate) fn project_unchecked(&self, space: &WeightedSpace, x: &Vector) -> Vector {
        match self {
            ConvexSet::Ball { center, radius } => {
                let d = x.sub(center);
                let n = space.norm_unchecked(&d);
                if n <= *radius {
                    x.clone()
                } else {
                    center.lincomb(1.0, &d, radius / n)
                }
            }
            ConvexSet::Box { lo, hi } => Vector::new(
                x.coords()
                    .iter()
                    .zip(lo.coords().iter().zip(hi.coords()))
                    .map(|(v, (l, h))| v.clamp(*l, *h))
                    .collect(),
            ),
            ConvexSet::Halfspace { normal, offset } => {
                let excess = space.inner_unchecked(normal, x) - offset;
                if excess <= 0.0 {
                    x.clone()
                } else {
                    x.lincomb(1.0, normal, -excess / space.inner_unchecked(normal, normal))
                }
            }
            ConvexSet::Simplex { .. } => project_simplex(space.weights(), x.coords()),
        }
    }

    /// How far `x` lies outside the set; nonpositive for members.
    ///
    /// Ball: `|x - c| - r`. Box: largest bound excess. Halfspace: signed
    /// distance to the boundary. Simplex: the larger of the most negative
    /// coordinate and `|sum - 1|`.
    pub fn violation(&self, space: &WeightedSpace, x: &Vector) -> f64 {
        match self {
            ConvexSet::Ball { center, radius } => space.distance_unchecked(x, center) - radius,
            ConvexSet::Box { lo, hi } => x
                .coords()
                .iter()
                .zip(lo.coords().iter().zip(hi.coords()))
                .map(|(v, (l, h))| (l - v).max(v - h))
                .fold(f64::NEG_INFINITY, f64::max),
            ConvexSet::Halfspace { normal, offset } => {
                (space.inner_unchecked(normal, x) - offset) / space.norm_unchecked(normal)
            }
            ConvexSet::Simplex { .. } => {
                let neg = x.coords().iter().fold(f64::NEG_INFINITY, |m, v| m.max(-v));
                let sum: f64 = x.coords().iter().sum();
                neg.max((sum - 1.0).abs())
            }
        }
    }

    pub fn contains(&self, space: &WeightedSpace, x: &Vector, tol: f64) -> bool {
        self.violation(space, x) <= tol
    }

    /// One point drawn uniformly from the set (from a bounded patch of it,
    /// for halfspaces).
    pub fn sample<R: Rng + ?Sized>(&self, space: &WeightedSpace, rng: &mut R) -> Vector {
        let dim = space.dim();
        match self {
            ConvexSet::Ball { center, radius } => {
                // Uniform in the Euclidean unit ball, mapped linearly onto the
                // weighted ball.
                let z: Vec<f64> = loop {
                    let z: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
                    if z.iter().any(|v: &f64| *v != 0.0) {
                        break z;
                    }
                };
                let zn = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
                Vector::new(
                    z.iter()
                        .zip(center.coords().iter().zip(space.weights()))
                        .map(|(zi, (ci, wi))| ci + r * zi / zn / wi.sqrt())
                        .collect(),
                )
            }
            ConvexSet::Box { lo, hi } => Vector::new(
                lo.coords()
                    .iter()
                    .zip(hi.coords())
                    .map(|(l, h)| l + (h - l) * rng.random::<f64>())
                    .collect(),
            ),
            ConvexSet::Halfspace { .. } => {
                let anchor = self.project_unchecked(space, &Vector::zeros(dim));
                loop {
                    let p = Vector::new(
                        anchor
                            .coords()
                            .iter()
                            .map(|a| a + HALFSPACE_PATCH * (2.0 * rng.random::<f64>() - 1.0))
                            .collect(),
                    );
                    if self.violation(space, &p) <= 0.0 {
                        return p;
                    }
                }
            }
            ConvexSet::Simplex { .. } => {
                let e: Vec<f64> = (0..dim).map(|_| Exp1.sample(rng)).collect();
                let total: f64 = e.iter().sum();
                Vector::new(e.into_iter().map(|v| v / total).collect())
            }
        }
    }
}

/// Projection onto `{x >= 0, sum x = 1}` under `sum_i w_i (x_i - y_i)^2`.
///
/// The minimizer is `x_i = max(0, y_i - tau / w_i)` for the threshold `tau`
/// that makes the coordinates sum to one. Breakpoints `w_i y_i` are visited
/// in decreasing order; the active set is the longest prefix whose candidate
/// threshold stays below its smallest breakpoint. With unit weights this is
/// the usual sort-and-threshold simplex projection.
fn project_simplex(weights: &[f64], y: &[f64]) -> Vector {
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&i, &j| (weights[j] * y[j]).total_cmp(&(weights[i] * y[i])));
    let mut sum_y = 0.0;
    let mut sum_inv_w = 0.0;
    let mut tau = 0.0;
    for &i in &order {
        let cand_sum_y = sum_y + y[i];
        let cand_inv_w = sum_inv_w + 1.0 / weights[i];
        let cand_tau = (cand_sum_y - 1.0) / cand_inv_w;
        if weights[i] * y[i] > cand_tau {
            sum_y = cand_sum_y;
            sum_inv_w = cand_inv_w;
            tau = cand_tau;
        } else {
            break;
        }
    }
    Vector::new(y.iter().zip(weights).map(|(yi, wi)| (yi - tau / wi).max(0.0)).collect())
}

#[derive(Debug, Clone)]
pub struct VipProblem {
    pub operator: Operator,
    pub gamma: f64,
    pub set: ConvexSet,
}

impl VipProblem {
    pub fn new(operator: Operator, gamma: f64, set: ConvexSet) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::param(format!("gamma must be positive, got {gamma}")));
        }
        set.validate(operator.space())?;
        Ok(VipProblem { operator, gamma, set })
    }

    pub fn space(&self) -> &WeightedSpace {
        self.operator.space()
    }
}

/// `x -> P_C(x - gamma S(x))`, whose fixed points solve the VIP.
pub fn vip_operator(problem: &VipProblem) -> Result<Operator> {
    Operator::projected(problem.set.clone(), problem.gamma, problem.operator.clone())
}

pub fn solve_vip(problem: &VipProblem, b: f64, cfg: &IterationConfig, x0: &Vector) -> Result<FixedPointResult> {
    iterate::solve(&vip_operator(problem)?, b, cfg, x0)
}

/// `min <S x*, x - x*>` over `probes` points drawn uniformly from `C`.
/// Nonnegative (up to rounding) exactly when no sampled point certifies that
/// `x*` fails the variational inequality.
pub fn vi_residual(problem: &VipProblem, x_star: &Vector, probes: usize, seed: u64) -> Result<f64> {
    let space = problem.space();
    space.check(x_star)?;
    if probes == 0 {
        return Err(Error::param("vi_residual needs at least one probe"));
    }
    let gap = space.distance_unchecked(x_star, &problem.set.project_unchecked(space, x_star));
    if gap > MEMBERSHIP_TOL {
        return Err(Error::Precondition(format!("x* lies at distance {gap:e} from C")));
    }
    let s = problem.operator.apply(x_star)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..probes {
        let x = problem.set.sample(space, &mut rng);
        worst = worst.min(space.inner_unchecked(&s, &x.sub(x_star)));
    }
    Ok(worst)
}
