//! `lambda-surf` experiment runner.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical non-convergence,
//! 4 invariant violation (including a flow that halts mid-run).

mod commands;
mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Context;
use crate::error::{invalid, CliError, Status, EXIT_OK, EXIT_VALIDATION};
use crate::output::RunDir;

const THREADS_ENV: &str = "LAMBDA_SURF_THREADS";

#[derive(Debug, Parser)]
#[command(name = "lambda-surf", version, about = "Numerical experiments on lambda-hypersurfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON config; omitted fields take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (default: `<command>-<timestamp>`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for sampled inputs.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Suppress the stdout summary.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Check <X,N> + H = λ on samples of planes, spheres and cylinders.
    VerifyCanonical,
    /// Solve the graphic λ-equation with Dirichlet data.
    SolveGraph,
    /// Expanding-ball experiment with affine boundary data.
    Bernstein,
    /// Weighted volume-preserving curvature flow of a closed curve.
    Flow,
    /// Solve, then check the operator inequality and identity on the solution.
    OperatorCheck,
    /// Hemisphere certificates and half-equator test for a set of normals.
    GaussMap,
    /// Area growth exponent of a canonical surface against its bound.
    AreaGrowth,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::VerifyCanonical => "verify-canonical",
            Command::SolveGraph => "solve-graph",
            Command::Bernstein => "bernstein",
            Command::Flow => "flow",
            Command::OperatorCheck => "operator-check",
            Command::GaussMap => "gauss-map",
            Command::AreaGrowth => "area-growth",
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| invalid(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| invalid(e.to_string()))
}

/// Loads and validates the config, then creates the run directory and runs.
fn execute<C>(
    command: Command,
    common: &Common,
    validate: impl Fn(&C) -> Result<(), CliError>,
    body: impl Fn(&C, &Context) -> Result<Status, CliError>,
) -> Result<Status, CliError>
where
    C: serde::de::DeserializeOwned + Default,
{
    let cfg: C = config::load(common.config.as_deref())?;
    validate(&cfg)?;
    let dir = RunDir::create(common.out.as_deref(), command.name())?;
    let ctx = Context { dir: &dir, seed: common.seed, quiet: common.quiet };
    let status = body(&cfg, &ctx)?;
    if !common.quiet {
        println!("{}: {} (output in {})", command.name(), status.label(), display(dir.path()));
    }
    Ok(status)
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn dispatch(cli: &Cli) -> Result<Status, CliError> {
    let c = &cli.common;
    let cmd = cli.command;
    match cmd {
        Command::VerifyCanonical => execute(cmd, c, config::VerifyCanonicalConfig::validate, commands::verify_canonical),
        Command::SolveGraph => {
            execute(cmd, c, |g: &config::GraphProblem| g.validate().map(drop), commands::solve_graph)
        }
        Command::Bernstein => execute(cmd, c, config::BernsteinConfig::validate, commands::bernstein),
        Command::Flow => execute(cmd, c, config::FlowConfig::validate, commands::flow),
        Command::OperatorCheck => execute(
            cmd,
            c,
            |o: &config::OperatorCheckConfig| o.validate().map(drop),
            commands::operator_check,
        ),
        Command::GaussMap => execute(cmd, c, config::GaussMapConfig::validate, commands::gauss_map),
        Command::AreaGrowth => execute(cmd, c, config::AreaGrowthConfig::validate, commands::area_growth),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = configure_threads().and_then(|_| dispatch(&cli));
    match result {
        Ok(status) => ExitCode::from(status.exit_code()),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
