//! Sampling-based certification of the enriched interpolative Kannan
//! condition
//!
//! ```text
//! |b (x - y) + T x - T y| <= a |x - T x|^alpha |y - T y|^(1 - alpha)
//! ```
//!
//! The least admissible `a` for given `(b, alpha)` is the supremum of
//! [`ratio`] over all pairs. Sampling only ever sees part of the space, so
//! `a_hat` is an empirical lower bound on that supremum: a passing
//! certificate means the sampler failed to refute the condition, not that
//! the condition was proved.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operators::SelfMap;
use crate::space::Vector;

pub const DEFAULT_SAMPLES: usize = 2000;
pub const DEFAULT_BOX_HALF_WIDTH: f64 = 10.0;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_B_GRID: [f64; 7] = [0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 8.0];
pub const DEFAULT_ALPHA_GRID: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];
pub const DEFAULT_DENOM_FLOOR: f64 = 1e-9;

/// Grid cells whose `a_hat` differ by at most this much are treated as ties
/// during [`search`].
pub const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CertifyConfig {
    pub samples: usize,
    pub box_lo: Vector,
    pub box_hi: Vector,
    pub seed: u64,
    pub b_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    /// Relative exclusion threshold: a point `x` is treated as fixed when
    /// `|x - T x| < denom_floor * (1 + |x|)`.
    pub denom_floor: f64,
    /// Extra deterministic pairs tried by [`refute`] before random ones.
    pub probes: Vec<(Vector, Vector)>,
}

impl CertifyConfig {
    pub fn for_dim(dim: usize) -> Self {
        CertifyConfig {
            samples: DEFAULT_SAMPLES,
            box_lo: Vector::constant(dim, -DEFAULT_BOX_HALF_WIDTH),
            box_hi: Vector::constant(dim, DEFAULT_BOX_HALF_WIDTH),
            seed: DEFAULT_SEED,
            b_grid: DEFAULT_B_GRID.to_vec(),
            alpha_grid: DEFAULT_ALPHA_GRID.to_vec(),
            denom_floor: DEFAULT_DENOM_FLOOR,
            probes: Vec::new(),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::param("samples must be positive"));
        }
        for v in [&self.box_lo, &self.box_hi] {
            if v.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: v.dim() });
            }
        }
        let ordered = self.box_lo.coords().iter().zip(self.box_hi.coords()).all(|(l, h)| l < h);
        if !ordered || !self.box_lo.is_finite() || !self.box_hi.is_finite() {
            return Err(Error::param("box_lo must be below box_hi in every coordinate"));
        }
        if self.b_grid.is_empty() || self.alpha_grid.is_empty() {
            return Err(Error::param("b_grid and alpha_grid must be nonempty"));
        }
        self.b_grid.iter().try_for_each(|&b| check_b(b))?;
        self.alpha_grid.iter().try_for_each(|&a| check_alpha(a))?;
        if !(self.denom_floor.is_finite() && self.denom_floor > 0.0) {
            return Err(Error::param("denom_floor must be positive"));
        }
        for (x, y) in &self.probes {
            if x.dim() != dim || y.dim() != dim {
                return Err(Error::param("probe pairs must match the space dimension"));
            }
        }
        Ok(())
    }

    /// The `samples` random pairs, drawn uniformly from the box in index
    /// order from a generator seeded with `seed`.
    pub fn sample_pairs(&self) -> Vec<(Vector, Vector)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.samples)
            .map(|_| {
                let x = self.sample_point(&mut rng);
                let y = self.sample_point(&mut rng);
                (x, y)
            })
            .collect()
    }

    fn sample_point(&self, rng: &mut ChaCha8Rng) -> Vector {
        Vector::new(
            self.box_lo
                .coords()
                .iter()
                .zip(self.box_hi.coords())
                .map(|(l, h)| l + (h - l) * rng.random::<f64>())
                .collect(),
        )
    }
}

fn check_b(b: f64) -> Result<()> {
    if !(b.is_finite() && b >= 0.0) {
        return Err(Error::param(format!("b must be nonnegative, got {b}")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!("alpha must lie in (0,1), got {alpha}")));
    }
    Ok(())
}

/// A pair together with its ratio.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub x: Vector,
    pub y: Vector,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    /// Largest sampled ratio; an empirical lower bound on the least
    /// admissible constant.
    pub a_hat: f64,
    pub b: f64,
    pub alpha: f64,
    pub valid_pairs: usize,
    pub excluded_pairs: usize,
    /// The pair attaining `a_hat` (lowest sample index on ties).
    pub max_witness: Witness,
}

impl Certificate {
    pub fn passing(&self) -> bool {
        self.a_hat < 1.0
    }
}

/// `|b (x - y) + T x - T y| / (|x - T x|^alpha |y - T y|^(1 - alpha))`, or
/// `None` when either point lies within the fixed-point exclusion threshold.
pub fn ratio<M: SelfMap + ?Sized>(
    op: &M,
    x: &Vector,
    y: &Vector,
    b: f64,
    alpha: f64,
    denom_floor: f64,
) -> Result<Option<f64>> {
    let space = op.space();
    let tx = op.apply(x)?;
    let ty = op.apply(y)?;
    let dx = space.distance_unchecked(x, &tx);
    let dy = space.distance_unchecked(y, &ty);
    if dx < denom_floor * (1.0 + space.norm_unchecked(x)) || dy < denom_floor * (1.0 + space.norm_unchecked(y)) {
        return Ok(None);
    }
    let num = space.norm_unchecked(&x.sub(y).lincomb(b, &tx.sub(&ty), 1.0));
    Ok(Some(num / (dx.powf(alpha) * dy.powf(1.0 - alpha))))
}

/// `a_hat` for fixed `(b, alpha)` from the configured random pairs.
pub fn estimate_constant<M: SelfMap + ?Sized>(op: &M, b: f64, alpha: f64, cfg: &CertifyConfig) -> Result<Certificate> {
    cfg.validate(op.space().dim())?;
    check_b(b)?;
    check_alpha(alpha)?;
    let pairs = cfg.sample_pairs();
    estimate_on_pairs(op, b, alpha, cfg.denom_floor, &pairs)
}

fn estimate_on_pairs<M: SelfMap + ?Sized>(
    op: &M,
    b: f64,
    alpha: f64,
    denom_floor: f64,
    pairs: &[(Vector, Vector)],
) -> Result<Certificate> {
    let ratios: Vec<Option<f64>> = pairs
        .par_iter()
        .map(|(x, y)| ratio(op, x, y, b, alpha, denom_floor))
        .collect::<Result<_>>()?;

    // Order-independent max; the lowest index wins ties.
    let mut best: Option<(usize, f64)> = None;
    let mut valid = 0;
    for (i, r) in ratios.iter().enumerate() {
        if let Some(r) = *r {
            valid += 1;
            if best.is_none_or(|(_, m)| r > m) {
                best = Some((i, r));
            }
        }
    }
    let Some((i, a_hat)) = best else {
        return Err(Error::Degenerate { excluded: pairs.len() });
    };
    Ok(Certificate {
        a_hat,
        b,
        alpha,
        valid_pairs: valid,
        excluded_pairs: pairs.len() - valid,
        max_witness: Witness { x: pairs[i].0.clone(), y: pairs[i].1.clone(), ratio: a_hat },
    })
}

/// Grid search over `cfg.b_grid x cfg.alpha_grid` for the smallest `a_hat`.
///
/// Cells within [`TIE_TOL`] of each other tie; ties go to the smaller `b`,
/// then to the `alpha` closest to one half, then to the smaller `alpha`.
pub fn search<M: SelfMap + ?Sized>(op: &M, cfg: &CertifyConfig) -> Result<Certificate> {
    cfg.validate(op.space().dim())?;
    let pairs = cfg.sample_pairs();
    let mut best: Option<Certificate> = None;
    let mut degenerate = None;
    for &b in &cfg.b_grid {
        for &alpha in &cfg.alpha_grid {
            let cert = match estimate_on_pairs(op, b, alpha, cfg.denom_floor, &pairs) {
                Ok(c) => c,
                Err(e @ Error::Degenerate { .. }) => {
                    degenerate = Some(e);
                    continue;
                }
                Err(e) => return Err(e),
            };
            if best.as_ref().is_none_or(|cur| preferred(&cert, cur)) {
                best = Some(cert);
            }
        }
    }
    best.ok_or_else(|| degenerate.expect("grids are nonempty"))
}

fn preferred(cand: &Certificate, cur: &Certificate) -> bool {
    if cand.a_hat < cur.a_hat - TIE_TOL {
        return true;
    }
    if (cand.a_hat - cur.a_hat).abs() > TIE_TOL {
        return false;
    }
    let key = |c: &Certificate| (c.b, (c.alpha - 0.5).abs(), c.alpha);
    let (cb, cd, ca) = key(cand);
    let (ub, ud, ua) = key(cur);
    (cb, cd, ca) < (ub, ud, ua)
}

/// First pair whose defined ratio is at least one, trying in order the pair
/// (zero vector, all-ones vector), the configured probes, and then the random
/// sample.
pub fn refute<M: SelfMap + ?Sized>(op: &M, b: f64, alpha: f64, cfg: &CertifyConfig) -> Result<Option<Witness>> {
    let dim = op.space().dim();
    cfg.validate(dim)?;
    check_b(b)?;
    check_alpha(alpha)?;
    let fixed = std::iter::once((Vector::zeros(dim), Vector::constant(dim, 1.0))).chain(cfg.probes.iter().cloned());
    for (x, y) in fixed.chain(cfg.sample_pairs()) {
        if let Some(r) = ratio(op, &x, &y, b, alpha, cfg.denom_floor)? {
            if r >= 1.0 {
                return Ok(Some(Witness { x, y, ratio: r }));
            }
        }
    }
    Ok(None)
}
