//! Problem configuration files.
//!
//! A configuration is TOML, or JSON when the file name ends in `.json`. Every
//! table rejects unknown keys. [`load_config`] fills every defaulted field, so
//! writing a loaded configuration back out and loading it again gives the
//! same value.
//!
//! ```toml
//! seed = 7
//!
//! [space]
//! dim = 1
//!
//! [operator]
//! kind = "affine"
//! matrix = [[-3.0]]
//! offset = [1.0]
//!
//! [certify]
//! b_grid = [0.0, 3.0]
//!
//! [iterate]
//! b = 3.0
//! a = 0.5
//! ```

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{PeriodicConfig, DEFAULT_CLUSTER_TOL};
use crate::certify::{self, CertifyConfig};
use crate::demos::Demo;
use crate::iterate::{IterationConfig, Lambda, StopRule};
use crate::operators::Operator;
use crate::space::{Vector, WeightedSpace};
use crate::vip::{ConvexSet, VipProblem};

pub const DEFAULT_SEED: u64 = certify::DEFAULT_SEED;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
}

impl ConfigError {
    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid { field: field.into(), message: message.into() }
    }
}

type CfgResult<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigFormat {
    Toml,
    Json,
}

impl ConfigFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => ConfigFormat::Json,
            _ => ConfigFormat::Toml,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certify: Option<CertifySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterate: Option<IterateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vip: Option<VipSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analyze: Option<AnalyzeSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum OperatorSpec {
    /// `T x = matrix x + offset`.
    Affine { matrix: Vec<Vec<f64>>, offset: Vec<f64> },
    /// `T x = P_set(x - gamma S x)` with `S` given by `inner`.
    Projected { gamma: f64, set: ConvexSet, inner: Box<OperatorSpec> },
    /// One of the built-in problems.
    Demo { name: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySpec {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box_lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box_hi: Option<Vec<f64>>,
    #[serde(default = "default_b_grid")]
    pub b_grid: Vec<f64>,
    #[serde(default = "default_alpha_grid")]
    pub alpha_grid: Vec<f64>,
    #[serde(default = "default_denom_floor")]
    pub denom_floor: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<[Vec<f64>; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterateSpec {
    #[serde(default = "default_lambda")]
    pub lambda: Lambda,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_stop_rule")]
    pub stop_rule: StopRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VipSpec {
    pub gamma: f64,
    pub set: ConvexSet,
    pub inner_operator: OperatorSpec,
    /// Number of points of the set sampled by the variational residual.
    #[serde(default = "default_vip_probes")]
    pub probes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeSpec {
    #[serde(default = "default_perturbations")]
    pub perturbations: usize,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_probes_per_eps")]
    pub probes_per_eps: usize,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_hi: Option<Vec<f64>>,
    #[serde(default = "default_cluster_tol")]
    pub cluster_tol: f64,
    #[serde(default = "default_periodic_max_iter")]
    pub max_iter: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plot_path: Option<String>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_samples() -> usize {
    certify::DEFAULT_SAMPLES
}
fn default_b_grid() -> Vec<f64> {
    certify::DEFAULT_B_GRID.to_vec()
}
fn default_alpha_grid() -> Vec<f64> {
    certify::DEFAULT_ALPHA_GRID.to_vec()
}
fn default_denom_floor() -> f64 {
    certify::DEFAULT_DENOM_FLOOR
}
fn default_lambda() -> Lambda {
    Lambda::Auto
}
fn default_tol() -> f64 {
    IterationConfig::default().tol
}
fn default_max_iter() -> usize {
    IterationConfig::default().max_iter
}
fn default_stop_rule() -> StopRule {
    IterationConfig::default().stop_rule
}
fn default_vip_probes() -> usize {
    1000
}
fn default_perturbations() -> usize {
    100
}
fn default_epsilons() -> Vec<f64> {
    vec![1e-1, 1e-3, 1e-6]
}
fn default_probes_per_eps() -> usize {
    25
}
fn default_n_list() -> Vec<usize> {
    vec![1, 2, 3]
}
fn default_starts() -> usize {
    20
}
fn default_cluster_tol() -> f64 {
    DEFAULT_CLUSTER_TOL
}
fn default_periodic_max_iter() -> usize {
    PeriodicConfig::default().max_iter
}

impl Default for CertifySpec {
    fn default() -> Self {
        CertifySpec {
            samples: default_samples(),
            box_lo: None,
            box_hi: None,
            b_grid: default_b_grid(),
            alpha_grid: default_alpha_grid(),
            denom_floor: default_denom_floor(),
            probes: Vec::new(),
        }
    }
}

impl Default for IterateSpec {
    fn default() -> Self {
        IterateSpec {
            lambda: default_lambda(),
            b: None,
            a: None,
            tol: default_tol(),
            max_iter: default_max_iter(),
            stop_rule: default_stop_rule(),
            x0: None,
        }
    }
}

impl Default for AnalyzeSpec {
    fn default() -> Self {
        AnalyzeSpec {
            perturbations: default_perturbations(),
            epsilons: default_epsilons(),
            probes_per_eps: default_probes_per_eps(),
            n_list: default_n_list(),
            starts: default_starts(),
            start_lo: None,
            start_hi: None,
            cluster_tol: default_cluster_tol(),
            max_iter: default_periodic_max_iter(),
        }
    }
}

impl OperatorSpec {
    fn affine_of(op: &Operator) -> Self {
        match op {
            Operator::Affine(m) => OperatorSpec::Affine { matrix: m.rows(), offset: m.offset().coords().to_vec() },
            _ => unreachable!("only affine maps are converted back to specs"),
        }
    }

    fn build(&self, space: &WeightedSpace, field: &str) -> CfgResult<Operator> {
        let err = |e: crate::Error| ConfigError::invalid(field, e.to_string());
        match self {
            OperatorSpec::Affine { matrix, offset } => {
                if matrix.len() != space.dim() {
                    return Err(ConfigError::invalid(
                        format!("{field}.matrix"),
                        format!("expected {} rows, got {}", space.dim(), matrix.len()),
                    ));
                }
                if offset.len() != space.dim() {
                    return Err(ConfigError::invalid(
                        format!("{field}.offset"),
                        format!("expected {} entries, got {}", space.dim(), offset.len()),
                    ));
                }
                Operator::affine(space.clone(), matrix.clone(), Vector::new(offset.clone()))
                    .map_err(|e| ConfigError::invalid(format!("{field}.matrix"), e.to_string()))
            }
            OperatorSpec::Projected { gamma, set, inner } => {
                let inner = inner.build(space, &format!("{field}.inner"))?;
                set.validate(space).map_err(|e| ConfigError::invalid(format!("{field}.set"), e.to_string()))?;
                Operator::projected(set.clone(), *gamma, inner).map_err(err)
            }
            OperatorSpec::Demo { name } => {
                let demo: Demo = name.parse().map_err(|e: crate::Error| ConfigError::invalid(format!("{field}.name"), e.to_string()))?;
                if demo.space() != *space {
                    return Err(ConfigError::invalid("space", format!("demo `{name}` lives on its own space; remove or match the [space] table")));
                }
                Ok(demo.operator())
            }
        }
    }
}

impl ProblemConfig {
    /// The configuration of a built-in problem, with every default filled.
    pub fn demo(demo: Demo) -> Self {
        let raw = ProblemConfig {
            seed: DEFAULT_SEED,
            space: None,
            operator: Some(OperatorSpec::Demo { name: demo.name().to_string() }),
            certify: None,
            iterate: None,
            vip: None,
            analyze: None,
            output: OutputSpec::default(),
        };
        raw.resolve().expect("demo configurations are valid")
    }

    /// Fills defaults and validates. Idempotent.
    pub fn resolve(mut self) -> CfgResult<Self> {
        let demo = self.demo_kind()?;
        if self.space.is_none() {
            self.space = match demo {
                Some(d) => Some(SpaceSpec { dim: d.dim(), weights: Some(d.space().weights().to_vec()) }),
                None => return Err(ConfigError::invalid("space", "missing [space] table")),
            };
        }
        let space_spec = self.space.as_mut().expect("filled above");
        if space_spec.dim == 0 {
            return Err(ConfigError::invalid("space.dim", "dimension must be at least 1"));
        }
        let dim = space_spec.dim;
        let weights = space_spec.weights.get_or_insert_with(|| vec![1.0; dim]);
        if weights.len() != dim {
            return Err(ConfigError::invalid("space.weights", format!("expected {dim} weights, got {}", weights.len())));
        }
        let space = WeightedSpace::new(weights.clone()).map_err(|e| ConfigError::invalid("space.weights", e.to_string()))?;

        if let Some(op) = &self.operator {
            op.build(&space, "operator")?;
        }

        let cert = self.certify.get_or_insert_with(CertifySpec::default);
        cert.box_lo.get_or_insert_with(|| vec![-certify::DEFAULT_BOX_HALF_WIDTH; dim]);
        cert.box_hi.get_or_insert_with(|| vec![certify::DEFAULT_BOX_HALF_WIDTH; dim]);
        if let Some(bad) = cert.alpha_grid.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(ConfigError::invalid("certify.alpha_grid", format!("alpha must lie in (0,1), got {bad}")));
        }
        if let Some(bad) = cert.b_grid.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
            return Err(ConfigError::invalid("certify.b_grid", format!("b must be finite and nonnegative, got {bad}")));
        }
        self.certify_config().validate(dim).map_err(|e| ConfigError::invalid("certify", e.to_string()))?;

        if demo == Some(Demo::VipBall) && self.vip.is_none() {
            let problem = Demo::VipBall.vip_problem().expect("vip demo");
            self.vip = Some(VipSpec {
                gamma: problem.gamma,
                set: problem.set.clone(),
                inner_operator: OperatorSpec::affine_of(&problem.operator),
                probes: default_vip_probes(),
            });
        }
        if let Some(vip) = &self.vip {
            let inner = vip.inner_operator.build(&space, "vip.inner_operator")?;
            vip.set.validate(&space).map_err(|e| ConfigError::invalid("vip.set", e.to_string()))?;
            VipProblem::new(inner, vip.gamma, vip.set.clone()).map_err(|e| ConfigError::invalid("vip.gamma", e.to_string()))?;
            if vip.probes == 0 {
                return Err(ConfigError::invalid("vip.probes", "must be at least 1"));
            }
        }

        let it = self.iterate.get_or_insert_with(IterateSpec::default);
        if it.b.is_none() {
            it.b = Some(demo.map_or(0.0, Demo::b));
        }
        if it.a.is_none() {
            it.a = demo.and_then(Demo::a);
        }
        if it.x0.is_none() {
            it.x0 = Some(demo.map_or_else(|| vec![0.0; dim], |d| d.x0().into_coords()));
        }
        let b = it.b.expect("filled above");
        if !(b.is_finite() && b >= 0.0) {
            return Err(ConfigError::invalid("iterate.b", format!("b must be finite and nonnegative, got {b}")));
        }
        let x0_len = it.x0.as_ref().map_or(0, Vec::len);
        if x0_len != dim {
            return Err(ConfigError::invalid("iterate.x0", format!("expected {dim} entries, got {x0_len}")));
        }
        it.lambda.resolve(b).map_err(|e| ConfigError::invalid("iterate.lambda", e.to_string()))?;
        self.iteration_config().validate().map_err(|e| ConfigError::invalid("iterate", e.to_string()))?;

        let an = self.analyze.get_or_insert_with(AnalyzeSpec::default);
        let (lo, hi) = demo.map_or_else(
            || (Vector::constant(dim, -certify::DEFAULT_BOX_HALF_WIDTH), Vector::constant(dim, certify::DEFAULT_BOX_HALF_WIDTH)),
            Demo::start_box,
        );
        an.start_lo.get_or_insert_with(|| lo.into_coords());
        an.start_hi.get_or_insert_with(|| hi.into_coords());
        for (field, v) in [("analyze.start_lo", &an.start_lo), ("analyze.start_hi", &an.start_hi)] {
            let len = v.as_ref().map_or(0, Vec::len);
            if len != dim {
                return Err(ConfigError::invalid(field, format!("expected {dim} entries, got {len}")));
            }
        }
        let (lo, hi) = (an.start_lo.as_ref().expect("filled"), an.start_hi.as_ref().expect("filled"));
        if lo.iter().zip(hi).any(|(l, h)| !(l.is_finite() && h.is_finite() && l <= h)) {
            return Err(ConfigError::invalid("analyze.start_hi", "start box needs finite bounds with lo <= hi"));
        }
        if an.perturbations == 0 {
            return Err(ConfigError::invalid("analyze.perturbations", "must be at least 1"));
        }
        if an.epsilons.is_empty() || an.epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(ConfigError::invalid("analyze.epsilons", "must be a nonempty list of positive numbers"));
        }
        if an.probes_per_eps == 0 {
            return Err(ConfigError::invalid("analyze.probes_per_eps", "must be at least 1"));
        }
        if an.n_list.is_empty() || an.n_list.contains(&0) {
            return Err(ConfigError::invalid("analyze.n_list", "must be a nonempty list of positive integers"));
        }
        if an.starts == 0 {
            return Err(ConfigError::invalid("analyze.starts", "must be at least 1"));
        }
        if !(an.cluster_tol.is_finite() && an.cluster_tol > 0.0) {
            return Err(ConfigError::invalid("analyze.cluster_tol", "must be positive"));
        }
        if an.max_iter == 0 {
            return Err(ConfigError::invalid("analyze.max_iter", "must be at least 1"));
        }
        Ok(self)
    }

    /// The built-in problem named by the operator, if any.
    pub fn demo_kind(&self) -> CfgResult<Option<Demo>> {
        match &self.operator {
            Some(OperatorSpec::Demo { name }) => {
                name.parse().map(Some).map_err(|e: crate::Error| ConfigError::invalid("operator.name", e.to_string()))
            }
            _ => Ok(None),
        }
    }

    pub fn space(&self) -> WeightedSpace {
        let spec = self.space.as_ref().expect("resolved config has a space");
        WeightedSpace::new(spec.weights.clone().expect("resolved config has weights")).expect("validated")
    }

    pub fn operator(&self) -> CfgResult<Operator> {
        match &self.operator {
            Some(op) => op.build(&self.space(), "operator"),
            None => Err(ConfigError::invalid("operator", "missing [operator] table")),
        }
    }

    pub fn certify_config(&self) -> CertifyConfig {
        let spec = self.certify.clone().unwrap_or_default();
        let dim = self.space.as_ref().map_or(1, |s| s.dim);
        let mut cfg = CertifyConfig::for_dim(dim);
        cfg.samples = spec.samples;
        if let Some(lo) = spec.box_lo {
            cfg.box_lo = Vector::new(lo);
        }
        if let Some(hi) = spec.box_hi {
            cfg.box_hi = Vector::new(hi);
        }
        cfg.seed = self.seed;
        cfg.b_grid = spec.b_grid;
        cfg.alpha_grid = spec.alpha_grid;
        cfg.denom_floor = spec.denom_floor;
        cfg.probes = spec.probes.into_iter().map(|[x, y]| (Vector::new(x), Vector::new(y))).collect();
        cfg
    }

    pub fn iteration_config(&self) -> IterationConfig {
        let spec = self.iterate.clone().unwrap_or_default();
        IterationConfig { lambda: spec.lambda, a: spec.a, tol: spec.tol, max_iter: spec.max_iter, stop_rule: spec.stop_rule }
    }

    /// Enrichment parameter used by the solver and the stability checks.
    pub fn b(&self) -> f64 {
        self.iterate.as_ref().and_then(|i| i.b).unwrap_or(0.0)
    }

    pub fn x0(&self) -> Vector {
        let dim = self.space.as_ref().map_or(1, |s| s.dim);
        Vector::new(self.iterate.as_ref().and_then(|i| i.x0.clone()).unwrap_or_else(|| vec![0.0; dim]))
    }

    pub fn vip_problem(&self) -> CfgResult<VipProblem> {
        let spec = self.vip.as_ref().ok_or_else(|| ConfigError::invalid("vip", "missing [vip] table"))?;
        let inner = spec.inner_operator.build(&self.space(), "vip.inner_operator")?;
        VipProblem::new(inner, spec.gamma, spec.set.clone()).map_err(|e| ConfigError::invalid("vip", e.to_string()))
    }

    pub fn analyze_spec(&self) -> AnalyzeSpec {
        self.analyze.clone().unwrap_or_default()
    }

    /// Seeded multistart points drawn uniformly from the analysis start box.
    pub fn periodic_starts(&self) -> Vec<Vector> {
        let an = self.analyze_spec();
        let lo = an.start_lo.unwrap_or_default();
        let hi = an.start_hi.unwrap_or_default();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..an.starts)
            .map(|_| Vector::new(lo.iter().zip(&hi).map(|(l, h)| if l < h { rng.random_range(*l..*h) } else { *l }).collect()))
            .collect()
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, column)
}

/// Parses configuration text without filling defaults.
pub fn parse_config(text: &str, format: ConfigFormat) -> CfgResult<ProblemConfig> {
    match format {
        ConfigFormat::Toml => toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
            ConfigError::Parse { line, column, message: e.message().to_string() }
        }),
        ConfigFormat::Json => serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }),
    }
}

/// Parses, fills defaults and validates configuration text.
pub fn config_from_str(text: &str, format: ConfigFormat) -> CfgResult<ProblemConfig> {
    parse_config(text, format)?.resolve()
}

pub fn load_config(path: &Path) -> CfgResult<ProblemConfig> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    config_from_str(&text, ConfigFormat::from_path(path))
}

pub fn write_config(cfg: &ProblemConfig, format: ConfigFormat) -> String {
    match format {
        ConfigFormat::Toml => toml::to_string(cfg).expect("configurations serialize to TOML"),
        ConfigFormat::Json => serde_json::to_string_pretty(cfg).expect("configurations serialize to JSON"),
    }
}
