//! Fixed-point solvers for enriched interpolative Kannan type operators.
//!
//! An operator `T` on a normed space is `(a, b, alpha)`-enriched
//! interpolative Kannan if
//!
//! ```text
//! |b (x - y) + T x - T y| <= a |x - T x|^alpha |y - T y|^(1 - alpha)
//! ```
//!
//! with `b >= 0`, `a in [0, 1)` and `alpha in (0, 1)`. Such an operator has a
//! unique fixed point, reached by the Krasnoselskii iteration with
//! `lambda = 1 / (b + 1)`.
//!
//! The crate is organised as:
//!
//! * [`space`]: weighted finite-dimensional inner-product spaces;
//! * [`operators`]: affine, projected and custom self-maps, averaging and
//!   composition;
//! * [`certify`]: sampling-based estimates and refutations of the condition;
//! * [`iterate`]: the Krasnoselskii solver, its trace and error bounds;
//! * [`analysis`]: well-posedness, periodic-point and Ulam-Hyers checks;
//! * [`vip`]: convex projections and variational inequalities;
//! * [`demos`]: the built-in example problems;
//! * [`cli`]: configuration files, task dispatch and output writers.
//!
//! ```
//! use kannan_fixpoint::iterate::{solve, IterationConfig};
//! use kannan_fixpoint::{Operator, Vector, WeightedSpace};
//!
//! let space = WeightedSpace::euclidean(1)?;
//! let t = Operator::affine(space, vec![vec![-1.0]], Vector::new(vec![1.0]))?;
//! let cfg = IterationConfig { a: Some(0.5), ..Default::default() };
//! let r = solve(&t, 1.0, &cfg, &Vector::new(vec![3.0]))?;
//! assert_eq!(r.lambda, 0.5);
//! assert!((r.x_star.coords()[0] - 0.5).abs() < 1e-12);
//! # Ok::<(), kannan_fixpoint::Error>(())
//! ```

pub mod analysis;
pub mod certify;
pub mod cli;
pub mod demos;
pub mod error;
pub mod iterate;
pub mod operators;
pub mod space;
pub mod vip;

pub use error::{Error, Result};
pub use operators::{averaged, iterate_n, AveragedOperator, Operator, SelfMap};
pub use space::{Vector, WeightedSpace};
