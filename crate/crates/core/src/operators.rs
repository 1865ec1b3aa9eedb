//! Self-maps of a [`WeightedSpace`], the averaged transform
//! `T_lambda = (1 - lambda) I + lambda T` and iterated composition.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::space::{Vector, WeightedSpace};
use crate::vip::ConvexSet;

/// A map from a space into itself.
///
/// Implementors provide [`SelfMap::eval`], which may assume a conforming
/// argument. Callers go through [`SelfMap::apply`], which checks conformance
/// and rejects non-finite output.
pub trait SelfMap: Send + Sync {
    fn space(&self) -> &WeightedSpace;

    fn eval(&self, x: &Vector) -> Vector;

    fn label(&self) -> String;

    fn apply(&self, x: &Vector) -> Result<Vector> {
        self.space().check(x)?;
        let y = self.eval(x);
        if !y.is_finite() {
            return Err(Error::NonFinite(self.label()));
        }
        Ok(y)
    }
}

impl<M: SelfMap + ?Sized> SelfMap for &M {
    fn space(&self) -> &WeightedSpace {
        (**self).space()
    }
    fn eval(&self, x: &Vector) -> Vector {
        (**self).eval(x)
    }
    fn label(&self) -> String {
        (**self).label()
    }
}

/// `x -> A x + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    space: WeightedSpace,
    /// Row-major `dim x dim`.
    matrix: Vec<f64>,
    offset: Vector,
}

impl AffineMap {
    pub fn new(space: WeightedSpace, rows: Vec<Vec<f64>>, offset: Vector) -> Result<Self> {
        let dim = space.dim();
        if rows.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: rows.len() });
        }
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::param(format!("matrix must be square: row of length {} in a {dim}x{dim} matrix", r.len())));
        }
        space.check(&offset)?;
        let matrix: Vec<f64> = rows.into_iter().flatten().collect();
        if !matrix.iter().all(|v| v.is_finite()) || !offset.is_finite() {
            return Err(Error::param("affine coefficients must be finite"));
        }
        Ok(AffineMap { space, matrix, offset })
    }

    /// `x -> scale * x + offset`.
    pub fn scaled_identity(space: WeightedSpace, scale: f64, offset: Vector) -> Result<Self> {
        let dim = space.dim();
        let rows = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { scale } else { 0.0 }).collect())
            .collect();
        AffineMap::new(space, rows, offset)
    }

    pub fn identity(space: WeightedSpace) -> Self {
        let dim = space.dim();
        AffineMap::scaled_identity(space, 1.0, Vector::zeros(dim)).expect("identity is well formed")
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.matrix.chunks(self.space.dim()).map(|r| r.to_vec()).collect()
    }

    pub fn offset(&self) -> &Vector {
        &self.offset
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.space.dim() + j]
    }
}

/// `x -> P_C(x - gamma * S(x))`.
#[derive(Debug, Clone)]
pub struct ProjectedMap {
    set: ConvexSet,
    gamma: f64,
    inner: Box<Operator>,
}

impl ProjectedMap {
    pub fn new(set: ConvexSet, gamma: f64, inner: Operator) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::param(format!("gamma must be positive, got {gamma}")));
        }
        set.validate(inner.space())?;
        Ok(ProjectedMap { set, gamma, inner: Box::new(inner) })
    }

    pub fn set(&self) -> &ConvexSet {
        &self.set
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn inner(&self) -> &Operator {
        &self.inner
    }
}

type EvalFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// An externally supplied evaluation procedure. Must be a deterministic pure
/// function; evaluations are never cached.
#[derive(Clone)]
pub struct CustomMap {
    space: WeightedSpace,
    name: String,
    f: Arc<EvalFn>,
}

impl CustomMap {
    pub fn new(
        space: WeightedSpace,
        name: impl Into<String>,
        f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        CustomMap { space, name: name.into(), f: Arc::new(f) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for CustomMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomMap").field("name", &self.name).field("dim", &self.space.dim()).finish()
    }
}

#[derive(Debug, Clone)]
pub enum Operator {
    Affine(AffineMap),
    Projected(ProjectedMap),
    Custom(CustomMap),
}

impl Operator {
    pub fn affine(space: WeightedSpace, rows: Vec<Vec<f64>>, offset: Vector) -> Result<Self> {
        AffineMap::new(space, rows, offset).map(Operator::Affine)
    }

    pub fn projected(set: ConvexSet, gamma: f64, inner: Operator) -> Result<Self> {
        ProjectedMap::new(set, gamma, inner).map(Operator::Projected)
    }

    pub fn custom(
        space: WeightedSpace,
        name: impl Into<String>,
        f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Operator::Custom(CustomMap::new(space, name, f))
    }

    pub fn dim(&self) -> usize {
        self.space().dim()
    }
}

impl SelfMap for Operator {
    fn space(&self) -> &WeightedSpace {
        match self {
            Operator::Affine(a) => &a.space,
            Operator::Projected(p) => p.inner.space(),
            Operator::Custom(c) => &c.space,
        }
    }

    fn eval(&self, x: &Vector) -> Vector {
        match self {
            Operator::Affine(a) => {
                let dim = a.space.dim();
                let xs = x.coords();
                let out = (0..dim)
                    .map(|i| (0..dim).map(|j| a.entry(i, j) * xs[j]).sum::<f64>() + a.offset.coords()[i])
                    .collect();
                Vector::new(out)
            }
            Operator::Projected(p) => {
                let step = x.lincomb(1.0, &p.inner.eval(x), -p.gamma);
                p.set.project_unchecked(p.inner.space(), &step)
            }
            Operator::Custom(c) => Vector::new((c.f)(x.coords())),
        }
    }

    fn label(&self) -> String {
        match self {
            Operator::Affine(_) => "affine operator".into(),
            Operator::Projected(_) => "projected operator".into(),
            Operator::Custom(c) => format!("custom operator `{}`", c.name),
        }
    }

    fn apply(&self, x: &Vector) -> Result<Vector> {
        self.space().check(x)?;
        let y = self.eval(x);
        if y.dim() != x.dim() {
            return Err(Error::DimensionMismatch { expected: x.dim(), found: y.dim() });
        }
        if !y.is_finite() {
            return Err(Error::NonFinite(self.label()));
        }
        Ok(y)
    }
}

/// `T_lambda = (1 - lambda) I + lambda T` for `lambda` in `(0, 1]`.
#[derive(Debug, Clone)]
pub struct AveragedOperator<M = Operator> {
    base: M,
    lambda: f64,
}

impl<M: SelfMap> AveragedOperator<M> {
    pub fn new(base: M, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::param(format!("lambda must lie in (0, 1], got {lambda}")));
        }
        Ok(AveragedOperator { base, lambda })
    }

    pub fn base(&self) -> &M {
        &self.base
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl AveragedOperator<Operator> {
    /// Affine representation `((1 - lambda) I + lambda A) x + lambda c`, when
    /// the base operator is affine.
    pub fn to_affine(&self) -> Option<Operator> {
        let Operator::Affine(a) = &self.base else { return None };
        let lam = self.lambda;
        let rows = a
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(j, v)| if i == j { (1.0 - lam) + lam * v } else { lam * v })
                    .collect()
            })
            .collect();
        Operator::affine(a.space.clone(), rows, a.offset.scale(lam)).ok()
    }
}

impl<M: SelfMap> SelfMap for AveragedOperator<M> {
    fn space(&self) -> &WeightedSpace {
        self.base.space()
    }

    fn eval(&self, x: &Vector) -> Vector {
        let tx = self.base.eval(x);
        if self.lambda == 1.0 {
            return tx;
        }
        x.lincomb(1.0 - self.lambda, &tx, self.lambda)
    }

    fn label(&self) -> String {
        format!("averaged {} (lambda = {})", self.base.label(), self.lambda)
    }
}

/// Builds `T_lambda` from `T`.
pub fn averaged<M: SelfMap>(base: M, lambda: f64) -> Result<AveragedOperator<M>> {
    AveragedOperator::new(base, lambda)
}

/// The `n`-fold composition `T^n`; `T^0` is the identity.
#[derive(Debug, Clone)]
pub struct Power<M> {
    base: M,
    n: usize,
}

impl<M: SelfMap> Power<M> {
    pub fn new(base: M, n: usize) -> Self {
        Power { base, n }
    }
}

impl<M: SelfMap> SelfMap for Power<M> {
    fn space(&self) -> &WeightedSpace {
        self.base.space()
    }

    fn eval(&self, x: &Vector) -> Vector {
        (0..self.n).fold(x.clone(), |acc, _| self.base.eval(&acc))
    }

    fn label(&self) -> String {
        format!("{}-fold composition of {}", self.n, self.base.label())
    }
}

/// `T^n(x0)`. A non-finite intermediate reports the 1-based step at which it
/// appeared.
pub fn iterate_n<M: SelfMap + ?Sized>(op: &M, x0: &Vector, n: usize) -> Result<Vector> {
    op.space().check(x0)?;
    let mut x = x0.clone();
    for step in 1..=n {
        x = op.eval(&x);
        if !x.is_finite() {
            return Err(Error::NumericOverflow { step });
        }
    }
    Ok(x)
}
