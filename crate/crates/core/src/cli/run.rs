//! Task dispatch.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{ConfigError, ProblemConfig};
use super::output::{plot_svg, render_trace, TraceFormat};
use crate::analysis::{self, PeriodicConfig, StabilityReport, SLACK};
use crate::certify::{self, Witness};
use crate::demos::Demo;
use crate::error::Error;
use crate::iterate::{self, BoundReport, FixedPointResult, StopRule, Trace};
use crate::operators::Operator;
use crate::space::Vector;
use crate::vip;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Check {
    Wellposed,
    Periodic,
    Ulam,
}

impl Check {
    pub const ALL: [Check; 3] = [Check::Wellposed, Check::Periodic, Check::Ulam];
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Task {
    Certify,
    Solve,
    /// An empty list runs every check.
    Analyze(Vec<Check>),
    Vip,
    Demo,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Certify => "certify",
            Task::Solve => "solve",
            Task::Analyze(_) => "analyze",
            Task::Vip => "vip",
            Task::Demo => "demo",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Module(#[from] Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Config(_) => "config",
            RunError::Module(_) => "module",
            RunError::Io { .. } => "io",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateSummary {
    pub passing: bool,
    /// Largest sampled ratio: an empirical lower bound on the true constant.
    pub a_hat: f64,
    pub b: f64,
    pub alpha: f64,
    pub valid_pairs: usize,
    pub excluded_pairs: usize,
    /// A pair with ratio at least 1, reported for failing certificates.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_alpha: Option<f64>,
    pub max_pair: Witness,
}

#[derive(Debug, Clone, Serialize)]
pub struct FixedPointSummary {
    pub x_star: Vector,
    pub iterations: usize,
    pub converged: bool,
    pub final_bound: f64,
    pub lambda: f64,
    pub rule: StopRule,
}

impl From<&FixedPointResult> for FixedPointSummary {
    fn from(r: &FixedPointResult) -> Self {
        FixedPointSummary {
            x_star: r.x_star.clone(),
            iterations: r.iterations,
            converged: r.converged,
            final_bound: r.final_bound,
            lambda: r.lambda,
            rule: r.rule,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub task: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub demo: Option<&'static str>,
    /// SHA-256 of the resolved configuration in compact JSON.
    pub input_digest: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_point: Option<FixedPointSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stability: Option<Vec<StabilityReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vi_residual: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub runtime_ms: u64,
}

impl RunSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summaries serialize") + "\n"
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: RunSummary,
    pub trace: Option<Trace>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.summary.passed {
            0
        } else {
            2
        }
    }
}

pub fn input_digest(cfg: &ProblemConfig) -> String {
    let canonical = serde_json::to_string(cfg).expect("configurations serialize");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// The grid exponent closest to 1/2, the smaller one on ties.
fn central_alpha(grid: &[f64]) -> f64 {
    grid.iter().copied().fold(f64::NAN, |best, a| {
        if best.is_nan() || (a - 0.5).abs() < (best - 0.5).abs() || ((a - 0.5).abs() == (best - 0.5).abs() && a < best) {
            a
        } else {
            best
        }
    })
}

fn certificate_stage(op: &Operator, cfg: &ProblemConfig) -> Result<CertificateSummary, Error> {
    let ccfg = cfg.certify_config();
    let cert = certify::search(op, &ccfg)?;
    let (witness, witness_alpha) = if cert.passing() {
        (None, None)
    } else {
        let alpha = central_alpha(&ccfg.alpha_grid);
        (certify::refute(op, cert.b, alpha, &ccfg)?, Some(alpha))
    };
    Ok(CertificateSummary {
        passing: cert.passing(),
        a_hat: cert.a_hat,
        b: cert.b,
        alpha: cert.alpha,
        valid_pairs: cert.valid_pairs,
        excluded_pairs: cert.excluded_pairs,
        witness_alpha: witness.as_ref().and(witness_alpha),
        witness,
        max_pair: cert.max_witness,
    })
}

struct Solved {
    result: Option<FixedPointResult>,
    trace: Trace,
    bounds: Option<BoundReport>,
    note: Option<String>,
}

impl Solved {
    fn converged(&self) -> bool {
        self.result.as_ref().is_some_and(|r| r.converged)
    }

    fn bounds_ok(&self) -> bool {
        self.bounds.as_ref().is_none_or(|b| b.passed)
    }
}

fn solve_stage(op: &Operator, cfg: &ProblemConfig) -> Result<Solved, Error> {
    let icfg = cfg.iteration_config();
    let (result, trace, note) = match iterate::solve(op, cfg.b(), &icfg, &cfg.x0()) {
        Ok(r) => {
            let note = (!r.converged).then(|| format!("no convergence within {} iterations", icfg.max_iter));
            let trace = r.trace.clone();
            (Some(r), trace, note)
        }
        Err(Error::Divergence { step, trace }) => (None, *trace, Some(format!("iteration diverged at step {step}"))),
        Err(e) => return Err(e),
    };
    let bounds = match icfg.a {
        Some(a) if !trace.rows.is_empty() => Some(iterate::check_bounds(&trace, a)?),
        _ => None,
    };
    Ok(Solved { result, trace, bounds, note })
}

fn stability_stage(op: &Operator, cfg: &ProblemConfig, x_star: &Vector, checks: &[Check]) -> Result<Vec<StabilityReport>, Error> {
    let an = cfg.analyze_spec();
    let b = cfg.b();
    let checks = if checks.is_empty() { &Check::ALL[..] } else { checks };
    checks
        .iter()
        .map(|check| match check {
            Check::Wellposed => {
                let e1 = Vector::basis(x_star.dim(), 0);
                let perturbed: Vec<Vector> = (1..=an.perturbations).map(|n| x_star.add(&e1.scale(1.0 / n as f64))).collect();
                analysis::wellposed_check(op, b, x_star, &perturbed)
            }
            Check::Periodic => {
                let settings = PeriodicConfig { max_iter: an.max_iter, ..PeriodicConfig::default() };
                analysis::periodic_point_check_with(op, b, &an.n_list, &cfg.periodic_starts(), an.cluster_tol, &settings)
            }
            Check::Ulam => analysis::ulam_hyers_check(op, b, x_star, &an.epsilons, an.probes_per_eps, cfg.seed),
        })
        .collect()
}

fn stability_ok(reports: &[StabilityReport]) -> bool {
    reports.iter().all(|r| r.passed && !r.inconclusive)
}

/// Runs one task on a resolved configuration.
pub fn run(task: &Task, cfg: &ProblemConfig) -> Result<Outcome, RunError> {
    let start = Instant::now();
    let demo = cfg.demo_kind()?;
    let mut summary = RunSummary {
        task: task.name(),
        demo: demo.map(Demo::name),
        input_digest: input_digest(cfg),
        passed: false,
        certificate: None,
        fixed_point: None,
        bounds: None,
        stability: None,
        vi_residual: None,
        notes: Vec::new(),
        runtime_ms: 0,
    };
    let mut trace = None;

    match task {
        Task::Certify => {
            let cert = certificate_stage(&cfg.operator()?, cfg)?;
            summary.passed = cert.passing;
            summary.certificate = Some(cert);
        }
        Task::Solve => {
            let solved = solve_stage(&cfg.operator()?, cfg)?;
            summary.passed = solved.converged() && solved.bounds_ok();
            record_solve(&mut summary, &mut trace, solved);
        }
        Task::Analyze(checks) => {
            let op = cfg.operator()?;
            let solved = solve_stage(&op, cfg)?;
            if solved.converged() {
                let x_star = solved.result.as_ref().expect("converged").x_star.clone();
                let reports = stability_stage(&op, cfg, &x_star, checks)?;
                summary.passed = stability_ok(&reports);
                summary.stability = Some(reports);
            } else {
                summary.notes.push("stability checks need a converged fixed point".into());
            }
            record_solve(&mut summary, &mut trace, solved);
        }
        Task::Vip => {
            let problem = cfg.vip_problem()?;
            let solved = solve_stage(&vip::vip_operator(&problem)?, cfg)?;
            if solved.converged() {
                let x_star = &solved.result.as_ref().expect("converged").x_star;
                let r = vip::vi_residual(&problem, x_star, vip_probes(cfg), cfg.seed)?;
                summary.passed = r >= -SLACK;
                summary.vi_residual = Some(r);
            }
            record_solve(&mut summary, &mut trace, solved);
        }
        Task::Demo => {
            let demo = demo.ok_or_else(|| ConfigError::Invalid {
                field: "operator".into(),
                message: "the demo task needs a demo operator".into(),
            })?;
            let op = cfg.operator()?;
            let cert = certificate_stage(&op, cfg)?;
            let cert_ok = cert.passing || !demo.certified();
            if !demo.certified() {
                summary.notes.push(format!("`{demo}` is not certified; its certificate is informational"));
            }
            summary.certificate = Some(cert);
            let solved = solve_stage(&op, cfg)?;
            let mut ok = cert_ok && solved.converged() && solved.bounds_ok();
            if solved.converged() {
                let x_star = solved.result.as_ref().expect("converged").x_star.clone();
                let checks: &[Check] = if demo.certified() { &Check::ALL } else { &[Check::Periodic] };
                let reports = stability_stage(&op, cfg, &x_star, checks)?;
                ok &= stability_ok(&reports);
                summary.stability = Some(reports);
                if cfg.vip.is_some() {
                    let r = vip::vi_residual(&cfg.vip_problem()?, &x_star, vip_probes(cfg), cfg.seed)?;
                    ok &= r >= -SLACK;
                    summary.vi_residual = Some(r);
                }
            }
            summary.passed = ok;
            record_solve(&mut summary, &mut trace, solved);
        }
    }
    summary.runtime_ms = start.elapsed().as_millis() as u64;
    Ok(Outcome { summary, trace })
}

fn vip_probes(cfg: &ProblemConfig) -> usize {
    cfg.vip.as_ref().map_or(1000, |v| v.probes)
}

fn record_solve(summary: &mut RunSummary, trace: &mut Option<Trace>, solved: Solved) {
    summary.fixed_point = solved.result.as_ref().map(FixedPointSummary::from);
    summary.bounds = solved.bounds;
    summary.notes.extend(solved.note);
    *trace = Some(solved.trace);
}

/// Where a run writes its files.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputPaths {
    pub trace: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub plot: Option<PathBuf>,
}

impl OutputPaths {
    /// `out_dir` places `trace.<ext>` and `summary.json` in that directory;
    /// otherwise the paths in the configuration's output table are used.
    pub fn resolve(cfg: &ProblemConfig, out_dir: Option<&Path>, plot: Option<&Path>, format: TraceFormat) -> Self {
        let plot = plot.map(Path::to_path_buf).or_else(|| cfg.output.plot_path.as_ref().map(PathBuf::from));
        match out_dir {
            Some(dir) => OutputPaths {
                trace: Some(dir.join(format!("trace.{}", format.extension()))),
                summary: Some(dir.join("summary.json")),
                plot,
            },
            None => OutputPaths {
                trace: cfg.output.trace_path.as_ref().map(PathBuf::from),
                summary: cfg.output.summary_path.as_ref().map(PathBuf::from),
                plot,
            },
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), RunError> {
    let io = |source| RunError::Io { path: path.display().to_string(), source };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io)?;
    }
    fs::write(path, contents).map_err(io)
}

pub fn write_outputs(outcome: &Outcome, paths: &OutputPaths, format: TraceFormat) -> Result<(), RunError> {
    if let Some(path) = &paths.summary {
        write_file(path, &outcome.summary.to_json())?;
    }
    if let Some(trace) = &outcome.trace {
        if let Some(path) = &paths.trace {
            write_file(path, &render_trace(trace, format))?;
        }
        if let Some(path) = &paths.plot {
            write_file(path, &plot_svg(trace))?;
        }
    }
    Ok(())
}
