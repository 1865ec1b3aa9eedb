//! Falsifiable checks of three stability properties of the fixed-point
//! problem, all phrased through the averaged operator `T_lambda` with
//! `lambda = 1 / (b + 1)`:
//!
//! * well-posedness: `|w - x*| <= |w - T_lambda w|` for every probe `w`;
//! * periodic point property P: `Fix((T_lambda)^n) = Fix(T)` for all `n`;
//! * Ulam-Hyers stability with `phi(eps) = eps`: every `w` with
//!   `|w - T_lambda w| <= eps` lies within `eps` of `x*`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::iterate::{self, IterationConfig, Lambda, StopRule};
use crate::operators::{AveragedOperator, Power, SelfMap};
use crate::space::Vector;

/// Slack on every per-case inequality.
pub const SLACK: f64 = 1e-9;

/// Largest residual `|x* - T_lambda x*|` accepted for a fixed point.
pub const FIXED_POINT_TOL: f64 = 1e-10;

pub const DEFAULT_CLUSTER_TOL: f64 = 1e-6;

/// Probe radii, in units of `eps`, for the Ulam-Hyers check.
pub const ULAM_RADII: [f64; 3] = [0.5, 1.0, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StabilityKind {
    WellPosed,
    PropertyP,
    UlamHyers,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseRecord {
    /// Tolerance or iterate count the case belongs to (`eps` for Ulam-Hyers,
    /// `n` for property P); absent for well-posedness.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<f64>,
    pub input: Vector,
    pub bound: f64,
    pub observed: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub kind: StabilityKind,
    pub passed: bool,
    /// Set when the check could not gather the evidence it needs.
    pub inconclusive: bool,
    /// Largest `observed - bound` over all cases.
    pub worst_margin: f64,
    pub details: Vec<CaseRecord>,
    /// Property P only: representatives of the clusters of computed fixed
    /// points of the iterates.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clusters: Option<Vec<Vector>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl StabilityReport {
    fn new(kind: StabilityKind, details: Vec<CaseRecord>) -> Self {
        let worst_margin = details.iter().map(|c| c.observed - c.bound).fold(f64::NEG_INFINITY, f64::max);
        let passed = !details.is_empty() && details.iter().all(|c| c.ok);
        StabilityReport { kind, passed, inconclusive: false, worst_margin, details, clusters: None, notes: Vec::new() }
    }
}

fn averaged_for<M: SelfMap + ?Sized>(op: &M, b: f64) -> Result<AveragedOperator<&M>> {
    AveragedOperator::new(op, Lambda::Auto.resolve(b)?)
}

fn require_fixed_point<M: SelfMap>(avg: &M, x_star: &Vector) -> Result<()> {
    let r = avg.space().distance_unchecked(x_star, &avg.apply(x_star)?);
    if r > FIXED_POINT_TOL {
        return Err(Error::Precondition(format!("x* is not a fixed point: residual {r:e}")));
    }
    Ok(())
}

/// Checks `|w - x*| <= |w - T_lambda w| + SLACK` for every `w` in
/// `perturbed`, and that ordering the probes by residual keeps the running
/// maximum error below the running maximum residual (so vanishing residuals
/// force vanishing errors).
pub fn wellposed_check<M: SelfMap + ?Sized>(op: &M, b: f64, x_star: &Vector, perturbed: &[Vector]) -> Result<StabilityReport> {
    if perturbed.is_empty() {
        return Err(Error::param("wellposed_check needs at least one perturbed point"));
    }
    let avg = averaged_for(op, b)?;
    let space = op.space();
    require_fixed_point(&avg, x_star)?;

    let mut details = Vec::with_capacity(perturbed.len());
    for w in perturbed {
        let residual = space.distance_unchecked(w, &avg.apply(w)?);
        let error = space.distance_unchecked(w, x_star);
        details.push(CaseRecord { group: None, input: w.clone(), bound: residual, observed: error, ok: error <= residual + SLACK });
    }
    let mut report = StabilityReport::new(StabilityKind::WellPosed, details);

    let mut order: Vec<&CaseRecord> = report.details.iter().collect();
    order.sort_by(|a, b| a.bound.total_cmp(&b.bound));
    let (mut max_err, mut max_res) = (0.0_f64, 0.0_f64);
    let dominated = order.iter().all(|c| {
        max_err = max_err.max(c.observed);
        max_res = max_res.max(c.bound);
        max_err <= max_res + SLACK
    });
    if !dominated {
        report.passed = false;
        report.notes.push("errors are not dominated by residuals along the residual ordering".into());
    }
    Ok(report)
}

/// Settings for the multistart solves inside [`periodic_point_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PeriodicConfig {
    fn default() -> Self {
        PeriodicConfig { tol: 1e-10, max_iter: 100_000 }
    }
}

/// Multistart approximation of `Fix((T_lambda)^n)` for each `n`.
///
/// Each start is driven to a fixed point of the `n`-fold composition by plain
/// Picard iteration. The converged points are clustered greedily (a point
/// joins the first cluster whose representative lies within `cluster_tol`).
/// The check passes when every solve converged, exactly one cluster remains,
/// and its representative is a fixed point of `T_lambda` within `cluster_tol`.
pub fn periodic_point_check<M: SelfMap + ?Sized>(
    op: &M,
    b: f64,
    n_list: &[usize],
    starts: &[Vector],
    cluster_tol: f64,
) -> Result<StabilityReport> {
    periodic_point_check_with(op, b, n_list, starts, cluster_tol, &PeriodicConfig::default())
}

pub fn periodic_point_check_with<M: SelfMap + ?Sized>(
    op: &M,
    b: f64,
    n_list: &[usize],
    starts: &[Vector],
    cluster_tol: f64,
    settings: &PeriodicConfig,
) -> Result<StabilityReport> {
    if n_list.is_empty() || n_list.contains(&0) {
        return Err(Error::param("n_list must be nonempty with every n >= 1"));
    }
    if starts.is_empty() {
        return Err(Error::param("periodic_point_check needs at least one start"));
    }
    if !(cluster_tol.is_finite() && cluster_tol > 0.0) {
        return Err(Error::param("cluster_tol must be positive"));
    }
    let avg = averaged_for(op, b)?;
    let space = op.space();
    let cfg = IterationConfig {
        lambda: Lambda::Fixed(1.0),
        a: None,
        tol: settings.tol,
        max_iter: settings.max_iter,
        stop_rule: StopRule::Residual,
    };

    let mut details = Vec::new();
    let mut notes = Vec::new();
    let mut found: Vec<Vector> = Vec::new();
    for &n in n_list {
        let composed = Power::new(&avg, n);
        for start in starts {
            let outcome = iterate::solve(&composed, 0.0, &cfg, start);
            let (observed, ok) = match outcome {
                Ok(r) if r.converged => {
                    let res = space.distance_unchecked(&r.x_star, &avg.apply(&r.x_star)?);
                    found.push(r.x_star);
                    (res, res <= cluster_tol)
                }
                Ok(r) => {
                    notes.push(format!("n = {n}: no convergence from {:?} after {} steps", start.coords(), r.iterations));
                    (f64::INFINITY, false)
                }
                Err(Error::Divergence { step, .. }) => {
                    notes.push(format!("n = {n}: diverged from {:?} at step {step}", start.coords()));
                    (f64::INFINITY, false)
                }
                Err(e) => return Err(e),
            };
            details.push(CaseRecord { group: Some(n as f64), input: start.clone(), bound: cluster_tol, observed, ok });
        }
    }

    let mut clusters: Vec<Vector> = Vec::new();
    for p in found {
        if !clusters.iter().any(|c| space.distance_unchecked(c, &p) <= cluster_tol) {
            clusters.push(p);
        }
    }
    let mut report = StabilityReport::new(StabilityKind::PropertyP, details);
    if clusters.len() != 1 {
        report.passed = false;
        notes.push(format!("found {} clusters of fixed points, expected exactly one", clusters.len()));
    }
    report.clusters = Some(clusters);
    report.notes = notes;
    Ok(report)
}

/// Probes spheres of radius `k * eps` (`k` cycling through [`ULAM_RADII`])
/// around `x*`, keeps the `eps`-solutions among them, and checks
/// `|x* - w| <= eps + SLACK` for each. An `eps` without any accepted probe
/// makes the report inconclusive.
pub fn ulam_hyers_check<M: SelfMap + ?Sized>(
    op: &M,
    b: f64,
    x_star: &Vector,
    epsilons: &[f64],
    probes_per_eps: usize,
    seed: u64,
) -> Result<StabilityReport> {
    if epsilons.is_empty() || epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::param("epsilons must be a nonempty list of positive numbers"));
    }
    if probes_per_eps == 0 {
        return Err(Error::param("probes_per_eps must be positive"));
    }
    let avg = averaged_for(op, b)?;
    let space = op.space();
    require_fixed_point(&avg, x_star)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut details = Vec::new();
    let mut empty = Vec::new();
    for &eps in epsilons {
        let mut kept = 0;
        for j in 0..probes_per_eps {
            let radius = eps * ULAM_RADII[j % ULAM_RADII.len()];
            let dir = random_unit(space, &mut rng);
            let w = x_star.lincomb(1.0, &dir, radius);
            let residual = space.distance_unchecked(&w, &avg.apply(&w)?);
            if residual > eps {
                continue;
            }
            kept += 1;
            let error = space.distance_unchecked(x_star, &w);
            details.push(CaseRecord { group: Some(eps), input: w, bound: eps, observed: error, ok: error <= eps + SLACK });
        }
        if kept == 0 {
            empty.push(eps);
        }
    }
    let mut report = StabilityReport::new(StabilityKind::UlamHyers, details);
    if !empty.is_empty() {
        report.passed = false;
        report.inconclusive = true;
        report.notes = empty.iter().map(|e| format!("no eps-solutions found for eps = {e:e}")).collect();
    }
    Ok(report)
}

fn random_unit(space: &crate::space::WeightedSpace, rng: &mut ChaCha8Rng) -> Vector {
    loop {
        let z = Vector::new((0..space.dim()).map(|_| StandardNormal.sample(rng)).collect());
        let n = space.norm_unchecked(&z);
        if n > 0.0 {
            return z.scale(1.0 / n);
        }
    }
}
