//! Command-line front end of the `kfp` binary.
//!
//! ```text
//! kfp certify --config problem.toml
//! kfp solve   --config problem.toml --out results/ --plot results/trace.svg
//! kfp analyze --config problem.toml --check wellposed --check ulam
//! kfp vip     --config problem.toml --format json
//! kfp demo lebesgue --seed 7
//! ```
//!
//! The run summary is printed to stdout. Exit codes: 0 when the task passed,
//! 2 on a refutation, divergence or failed check, 1 on usage and
//! configuration errors.

pub mod config;
pub mod output;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{load_config, write_config, ConfigError, ConfigFormat, ProblemConfig};
pub use output::TraceFormat;
pub use run::{run, write_outputs, Check, Outcome, OutputPaths, RunError, RunSummary, Task};

use crate::demos::Demo;

#[derive(Debug, Parser)]
#[command(name = "kfp", version, about = "Fixed-point solver for enriched interpolative Kannan type operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Directory receiving trace.<format> and summary.json.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trace file format.
    #[arg(long, global = true, value_enum, default_value_t = TraceFormat::Csv)]
    format: TraceFormat,
    /// Writes a convergence plot (SVG).
    #[arg(long, global = true)]
    plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// Problem configuration (TOML, or JSON for *.json).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimates the contraction constant over a grid of (b, alpha).
    Certify(ConfigArg),
    /// Runs the Krasnoselskii iteration.
    Solve(ConfigArg),
    /// Solves, then runs stability checks on the fixed point.
    Analyze {
        #[command(flatten)]
        config: ConfigArg,
        /// Checks to run; all of them when omitted.
        #[arg(long, value_enum)]
        check: Vec<Check>,
    },
    /// Solves the variational inequality of the [vip] table.
    Vip(ConfigArg),
    /// Runs a built-in problem end to end.
    Demo {
        /// kannan-affine, lebesgue, vip-ball or cosine.
        name: String,
    },
}

fn report_error(kind: &str, message: &str) {
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
}

/// Parses `args` (including the program name), runs the task and returns the
/// process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };

    let (task, cfg) = match &cli.command {
        Command::Certify(c) => (Task::Certify, load_config(&c.config)),
        Command::Solve(c) => (Task::Solve, load_config(&c.config)),
        Command::Analyze { config, check } => (Task::Analyze(check.clone()), load_config(&config.config)),
        Command::Vip(c) => (Task::Vip, load_config(&c.config)),
        Command::Demo { name } => match name.parse::<Demo>() {
            Ok(d) => (Task::Demo, Ok(ProblemConfig::demo(d))),
            Err(e) => {
                report_error("usage", &e.to_string());
                return 1;
            }
        },
    };
    let mut cfg = match cfg {
        Ok(cfg) => cfg,
        Err(e) => {
            report_error("config", &e.to_string());
            return 1;
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }

    let outcome = match run(&task, &cfg) {
        Ok(o) => o,
        Err(e) => {
            report_error(e.kind(), &e.to_string());
            return 1;
        }
    };
    let paths = OutputPaths::resolve(&cfg, cli.out.as_deref(), cli.plot.as_deref(), cli.format);
    if let Err(e) = write_outputs(&outcome, &paths, cli.format) {
        report_error(e.kind(), &e.to_string());
        return 1;
    }
    print!("{}", outcome.summary.to_json());
    outcome.exit_code()
}
