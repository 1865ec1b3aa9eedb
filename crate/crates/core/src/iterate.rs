//! Krasnoselskii iteration `x_{n+1} = (1 - lambda) x_n + lambda T x_n`, i.e.
//! Picard iteration of the averaged operator `T_lambda`, with the a-priori
//! and a-posteriori error bounds that follow from the step contraction
//! `|x_{n+1} - x_n| <= a |x_n - x_{n-1}|`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{AveragedOperator, SelfMap};
use crate::space::{Vector, WeightedSpace};

/// Any coordinate above this magnitude aborts the iteration.
pub const DIVERGENCE_LIMIT: f64 = 1e150;

/// Absolute slack used by [`check_bounds`].
pub const BOUND_SLACK: f64 = 1e-9;

/// Above this many iterates the tail-bound check visits a geometric ladder of
/// partners for each `n` instead of every later iterate.
const TAIL_PAIRS_FULL_LIMIT: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lambda {
    /// `1 / (b + 1)` for the enrichment parameter `b` passed to [`solve`].
    Auto,
    #[serde(untagged)]
    Fixed(f64),
}

impl Lambda {
    pub fn resolve(self, b: f64) -> Result<f64> {
        let lam = match self {
            Lambda::Auto => {
                if !(b.is_finite() && b >= 0.0) {
                    return Err(Error::param(format!("b must be a finite nonnegative number, got {b}")));
                }
                1.0 / (b + 1.0)
            }
            Lambda::Fixed(l) => l,
        };
        if !(lam > 0.0 && lam <= 1.0) {
            return Err(Error::param(format!("lambda must lie in (0, 1], got {lam}")));
        }
        Ok(lam)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopRule {
    /// `a^n / (1 - a) |x_1 - x_0| <= tol`.
    Apriori,
    /// `a / (1 - a) |x_n - x_{n-1}| <= tol`.
    Aposteriori,
    /// `|x_n - T_lambda x_n| <= tol`.
    Residual,
}

impl StopRule {
    pub fn uses_bounds(self) -> bool {
        !matches!(self, StopRule::Residual)
    }

    pub fn name(self) -> &'static str {
        match self {
            StopRule::Apriori => "apriori",
            StopRule::Aposteriori => "aposteriori",
            StopRule::Residual => "residual",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationConfig {
    pub lambda: Lambda,
    /// Contraction constant used for the error bounds. Without it the bound
    /// columns of the trace stay empty.
    pub a: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub stop_rule: StopRule,
}

impl Default for IterationConfig {
    fn default() -> Self {
        IterationConfig { lambda: Lambda::Auto, a: None, tol: 1e-10, max_iter: 1_000_000, stop_rule: StopRule::Residual }
    }
}

impl IterationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::param(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter must be at least 1"));
        }
        match self.a {
            Some(a) if !(0.0..1.0).contains(&a) => {
                if self.stop_rule.uses_bounds() {
                    return Err(Error::param(format!(
                        "the {} stopping rule needs a in [0, 1), got {a}",
                        self.stop_rule.name()
                    )));
                }
            }
            None if self.stop_rule.uses_bounds() => {
                return Err(Error::param(format!("the {} stopping rule needs a contraction constant a", self.stop_rule.name())));
            }
            _ => {}
        }
        Ok(())
    }

    /// The constant to use for bounds: `a` when it lies in `[0, 1)`.
    fn bound_constant(&self) -> Option<f64> {
        self.a.filter(|a| (0.0..1.0).contains(a))
    }
}

/// One iterate `x_n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub n: usize,
    /// `|x_{n+1} - x_n|`.
    pub step_norm: f64,
    /// `|x_n - T_lambda x_n|`; identical to `step_norm`.
    pub residual: f64,
    /// `a^n / (1 - a) |x_1 - x_0|`, a bound on `|x_n - x*|`.
    pub apriori_bound: Option<f64>,
    /// `a / (1 - a) |x_n - x_{n-1}|`, a bound on `|x_n - x*|`; absent at `n = 0`.
    pub aposteriori_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub lambda: f64,
    pub a: Option<f64>,
    pub rows: Vec<TraceRow>,
    /// `x_0, ..., x_{N+1}` for a trace of `N + 1` rows; empty for synthetic
    /// traces.
    #[serde(skip)]
    pub points: Vec<Vector>,
    #[serde(skip)]
    pub space: Option<WeightedSpace>,
}

impl Trace {
    /// A trace holding only step norms, as if produced with `lambda = 1`.
    pub fn from_step_norms(steps: &[f64]) -> Self {
        let rows = steps
            .iter()
            .enumerate()
            .map(|(n, &s)| TraceRow { n, step_norm: s, residual: s, apriori_bound: None, aposteriori_bound: None })
            .collect();
        Trace { lambda: 1.0, a: None, rows, points: Vec::new(), space: None }
    }

    pub fn step_norms(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.step_norm).collect()
    }

    /// Distance between recorded iterates `x_n` and `x_m`.
    fn distance(&self, n: usize, m: usize) -> f64 {
        match &self.space {
            Some(space) => space.distance_unchecked(&self.points[m], &self.points[n]),
            None => self.points[m].sub(&self.points[n]).coords().iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointResult {
    pub x_star: Vector,
    /// Index `n` of the returned iterate `x_n`.
    pub iterations: usize,
    pub converged: bool,
    /// Value of the stopping rule at the returned iterate.
    pub final_bound: f64,
    pub lambda: f64,
    pub rule: StopRule,
    pub trace: Trace,
}

/// Runs the Krasnoselskii iteration of `op` from `x0`.
///
/// Row `n` of the trace describes `x_n`. The iteration stops at the first
/// `n` whose stopping-rule value is at most `tol` and returns that `x_n`;
/// otherwise it returns the last recorded iterate with `converged = false`.
pub fn solve<M: SelfMap + ?Sized>(op: &M, b: f64, cfg: &IterationConfig, x0: &Vector) -> Result<FixedPointResult> {
    cfg.validate()?;
    let lambda = cfg.lambda.resolve(b)?;
    op.space().check(x0)?;
    if !x0.is_finite() {
        return Err(Error::param("starting point must be finite"));
    }
    let avg = AveragedOperator::new(op, lambda)?;
    let space = op.space();
    let a = cfg.bound_constant();

    let mut trace = Trace { lambda, a, rows: Vec::new(), points: vec![x0.clone()], space: Some(space.clone()) };
    let mut x = x0.clone();
    let mut first_step = None;
    let mut prev_step: Option<f64> = None;

    for n in 0..cfg.max_iter {
        let next = avg.eval(&x);
        if !next.is_finite() || next.max_abs() > DIVERGENCE_LIMIT {
            return Err(Error::Divergence { step: n + 1, trace: Box::new(trace) });
        }
        let step = space.distance_unchecked(&next, &x);
        let step0 = *first_step.get_or_insert(step);
        let apriori_bound = a.map(|a| a.powi(n as i32) / (1.0 - a) * step0);
        let aposteriori_bound = a.zip(prev_step).map(|(a, prev)| a / (1.0 - a) * prev);
        trace.rows.push(TraceRow { n, step_norm: step, residual: step, apriori_bound, aposteriori_bound });
        trace.points.push(next.clone());

        let rule_value = match cfg.stop_rule {
            StopRule::Residual => Some(step),
            StopRule::Apriori => apriori_bound,
            StopRule::Aposteriori => aposteriori_bound,
        };
        let converged = rule_value.is_some_and(|v| v <= cfg.tol);
        if converged || n + 1 == cfg.max_iter {
            return Ok(FixedPointResult {
                x_star: x,
                iterations: n,
                converged,
                final_bound: rule_value.unwrap_or(f64::INFINITY),
                lambda,
                rule: cfg.stop_rule,
                trace,
            });
        }
        prev_step = Some(step);
        x = next;
    }
    unreachable!("max_iter >= 1 guarantees a return inside the loop")
}

/// `|T_lambda^{n+1} x0 - T_lambda^n x0|` for `n = 0 .. n_max - 1`.
pub fn asymptotic_regularity<M: SelfMap + ?Sized>(op: &M, lambda: f64, x0: &Vector, n_max: usize) -> Result<Vec<f64>> {
    if n_max == 0 {
        return Err(Error::param("n_max must be at least 1"));
    }
    let avg = AveragedOperator::new(op, lambda)?;
    op.space().check(x0)?;
    let space = op.space();
    let mut x = x0.clone();
    let mut out = Vec::with_capacity(n_max);
    for n in 0..n_max {
        let next = avg.eval(&x);
        if !next.is_finite() || next.max_abs() > DIVERGENCE_LIMIT {
            let mut trace = Trace::from_step_norms(&out);
            trace.lambda = lambda;
            return Err(Error::Divergence { step: n + 1, trace: Box::new(trace) });
        }
        out.push(space.distance_unchecked(&next, &x));
        x = next;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub passed: bool,
    pub checked: usize,
    /// Largest `lhs - rhs`; positive values are violations.
    pub worst_margin: f64,
    /// Row index (or `(n, m)` pair flattened to `n`) of the worst margin.
    pub worst_index: usize,
}

impl InequalityCheck {
    fn new() -> Self {
        InequalityCheck { passed: true, checked: 0, worst_margin: f64::NEG_INFINITY, worst_index: 0 }
    }

    fn record(&mut self, index: usize, lhs: f64, rhs: f64) {
        let margin = lhs - rhs;
        self.checked += 1;
        if margin > self.worst_margin {
            self.worst_margin = margin;
            self.worst_index = index;
        }
        if margin > BOUND_SLACK {
            self.passed = false;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub a: f64,
    pub passed: bool,
    /// `|x_{n+1} - x_n| <= a |x_n - x_{n-1}|`.
    pub step_contraction: InequalityCheck,
    /// `|x_{n+1} - x_n| <= a^n |x_1 - x_0|`.
    pub apriori_chain: InequalityCheck,
    /// `|x_n - x_{n+r}| <= a^n / (1 - a) |x_1 - x_0|`.
    pub tail_bound: InequalityCheck,
}

/// Checks a trace against the inequality chain implied by a contraction
/// constant `a`, with absolute slack [`BOUND_SLACK`].
///
/// The tail bound uses the recorded iterates when the trace carries them and
/// falls back to partial sums of step norms (an upper estimate of the same
/// distances) for synthetic traces.
pub fn check_bounds(trace: &Trace, a: f64) -> Result<BoundReport> {
    if !(0.0..1.0).contains(&a) {
        return Err(Error::param(format!("a must lie in [0, 1), got {a}")));
    }
    let steps = trace.step_norms();
    if steps.is_empty() {
        return Err(Error::param("check_bounds needs a non-empty trace"));
    }
    let step0 = steps[0];

    let mut contraction = InequalityCheck::new();
    for n in 1..steps.len() {
        contraction.record(n, steps[n], a * steps[n - 1]);
    }

    let mut chain = InequalityCheck::new();
    for (n, &s) in steps.iter().enumerate() {
        chain.record(n, s, a.powi(n as i32) * step0);
    }

    let mut tail = InequalityCheck::new();
    let tail_rhs = |n: usize| a.powi(n as i32) / (1.0 - a) * step0;
    if trace.points.len() == steps.len() + 1 {
        let pts = &trace.points;
        let last = pts.len() - 1;
        for n in 0..last {
            let partners: Vec<usize> = if pts.len() <= TAIL_PAIRS_FULL_LIMIT {
                (n + 1..=last).collect()
            } else {
                let mut m: Vec<usize> = std::iter::successors(Some(1usize), |d| d.checked_mul(2))
                    .map(|d| n + d)
                    .take_while(|&m| m <= last)
                    .collect();
                m.push(last);
                m
            };
            for m in partners {
                tail.record(n, trace.distance(n, m), tail_rhs(n));
            }
        }
    } else {
        let mut suffix = 0.0;
        for n in (0..steps.len()).rev() {
            suffix += steps[n];
            tail.record(n, suffix, tail_rhs(n));
        }
    }

    Ok(BoundReport {
        a,
        passed: contraction.passed && chain.passed && tail.passed,
        step_contraction: contraction,
        apriori_chain: chain,
        tail_bound: tail,
    })
}
