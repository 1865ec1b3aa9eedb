//! Finite-dimensional real inner-product spaces.
//!
//! A [`WeightedSpace`] is `R^dim` with the inner product
//! `<x, y> = sum_i w_i x_i y_i` for positive weights `w_i`. With all weights
//! equal to one this is the Euclidean space; otherwise it is the discretized
//! `L^2(Y, mu)` of a finite atomic measure whose atoms carry the weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of a [`WeightedSpace`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Self {
        Vector(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    /// The constant vector with every coordinate equal to `value`.
    pub fn constant(dim: usize, value: f64) -> Self {
        Vector(vec![value; dim])
    }

    /// The `i`-th standard basis vector.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = Vector::zeros(dim);
        v.0[i] = 1.0;
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Largest absolute coordinate.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn add(&self, other: &Vector) -> Vector {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Vector {
        Vector(self.0.iter().map(|v| s * v).collect())
    }

    /// `alpha * self + beta * other`, coordinatewise.
    pub fn lincomb(&self, alpha: f64, other: &Vector, beta: f64) -> Vector {
        self.zip_with(other, |a, b| alpha * a + beta * b)
    }

    fn zip_with(&self, other: &Vector, f: impl Fn(f64, f64) -> f64) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect())
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

/// `R^dim` with positive quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSpace {
    weights: Vec<f64>,
}

impl WeightedSpace {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::param("space dimension must be at least 1"));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::param(format!("weights must be finite and positive, got {w}")));
        }
        Ok(WeightedSpace { weights })
    }

    /// Standard Euclidean space (all weights one).
    pub fn euclidean(dim: usize) -> Result<Self> {
        WeightedSpace::new(vec![1.0; dim])
    }

    /// `dim` atoms of equal measure summing to `total`.
    pub fn uniform_measure(dim: usize, total: f64) -> Result<Self> {
        WeightedSpace::new(vec![total / dim as f64; dim])
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_euclidean(&self) -> bool {
        self.weights.iter().all(|&w| w == 1.0)
    }

    pub fn check(&self, x: &Vector) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.dim() });
        }
        Ok(())
    }

    pub fn inner(&self, x: &Vector, y: &Vector) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.inner_unchecked(x, y))
    }

    pub fn norm(&self, x: &Vector) -> Result<f64> {
        self.check(x)?;
        Ok(self.norm_unchecked(x))
    }

    /// `norm(x - y)`.
    pub fn distance(&self, x: &Vector, y: &Vector) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.norm_unchecked(&x.sub(y)))
    }

    pub(crate) fn inner_unchecked(&self, x: &Vector, y: &Vector) -> f64 {
        self.weights
            .iter()
            .zip(x.coords().iter().zip(y.coords()))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    pub(crate) fn norm_unchecked(&self, x: &Vector) -> f64 {
        self.inner_unchecked(x, x).sqrt()
    }

    pub(crate) fn distance_unchecked(&self, x: &Vector, y: &Vector) -> f64 {
        self.norm_unchecked(&x.sub(y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec())
    }

    #[test]
    fn inner_examples() {
        let e2 = WeightedSpace::euclidean(2).unwrap();
        assert_eq!(e2.inner(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        assert_eq!(e2.inner(&v(&[1.0, 2.0]), &v(&[3.0, 4.0])).unwrap(), 11.0);
        let half = WeightedSpace::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(half.inner(&v(&[1.0, 1.0]), &v(&[1.0, 1.0])).unwrap(), 1.0);
    }

    #[test]
    fn norm_examples() {
        let e2 = WeightedSpace::euclidean(2).unwrap();
        assert_eq!(e2.norm(&v(&[3.0, 4.0])).unwrap(), 5.0);
        let e1 = WeightedSpace::new(vec![1.0]).unwrap();
        assert_eq!(e1.norm(&v(&[-2.0])).unwrap(), 2.0);
        let quarter = WeightedSpace::uniform_measure(4, 1.0).unwrap();
        assert_eq!(quarter.weights(), &[0.25; 4]);
        assert_eq!(quarter.norm(&Vector::constant(4, 1.0)).unwrap(), 1.0);
    }

    #[test]
    fn norm_is_sqrt_of_inner() {
        let s = WeightedSpace::new(vec![0.3, 1.7, 2.0]).unwrap();
        let x = v(&[1.25, -3.5, 0.1]);
        assert_eq!(s.norm(&x).unwrap(), s.inner(&x, &x).unwrap().sqrt());
        assert_eq!(s.norm(&Vector::zeros(3)).unwrap(), 0.0);
    }

    #[test]
    fn conformance_errors() {
        let s = WeightedSpace::euclidean(2).unwrap();
        assert!(matches!(
            s.inner(&v(&[1.0]), &v(&[1.0, 2.0])),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
        assert!(s.norm(&v(&[1.0, 2.0, 3.0])).is_err());
    }

    #[test]
    fn invalid_spaces() {
        assert!(WeightedSpace::new(vec![]).is_err());
        assert!(WeightedSpace::new(vec![1.0, 0.0]).is_err());
        assert!(WeightedSpace::new(vec![1.0, -2.0]).is_err());
        assert!(WeightedSpace::new(vec![f64::NAN]).is_err());
    }
}
