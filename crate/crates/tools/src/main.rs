use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jko_tools::commands::{converge, estimates, flow, ot, pde};
use jko_tools::{Result, Status};

/// JKO scheme runs, reference solutions and a priori estimate reports on the flat torus.
#[derive(Parser)]
#[command(name = "jko", version)]
struct Cli {
    /// Raise the log level (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Transport between two density files; prints the cost.
    Ot {
        source: PathBuf,
        target: PathBuf,
        #[arg(long, value_enum, default_value = "lp")]
        solver: ot::OtSolver,
        /// Entropic regularization (default 1e-3 diam²).
        #[arg(long)]
        epsilon: Option<f64>,
        /// Marginal tolerance of the entropic solver.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Weight field of the reference measure (default Lebesgue).
        #[arg(long)]
        weight: Option<PathBuf>,
        /// Directory for potentials, map and plan.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs the JKO scheme and dumps the trajectory with its estimate report.
    Flow(RunArgs),
    /// Error of the scheme against the reference solution for each N of `run.n_list`.
    Converge(RunArgs),
    /// Re-evaluates every estimate on a trajectory written by `flow`.
    Estimates {
        /// Directory holding `manifest.json`.
        trajectory: PathBuf,
        /// Constant of the lambda recursion.
        #[arg(long)]
        c: Option<f64>,
        /// Report directory (default: the trajectory directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Crank-Nicolson reference solution at `run.samples`.
    Pde(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    config: PathBuf,
    /// Output directory (overrides `run.output`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<Status> {
    match cli.command {
        Command::Ot { source, target, solver, epsilon, tol, weight, out } => ot::cmd_ot(&ot::OtArgs {
            source: &source,
            target: &target,
            solver,
            epsilon,
            tol,
            weight: weight.as_deref(),
            out: out.as_deref(),
        }),
        Command::Flow(a) => flow::cmd_flow(&a.config, a.out.as_deref()),
        Command::Converge(a) => converge::cmd_converge(&a.config, a.out.as_deref()),
        Command::Estimates { trajectory, c, out } => estimates::cmd_estimates(&trajectory, c, out.as_deref()),
        Command::Pde(a) => pde::cmd_pde(&a.config, a.out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run(cli) {
        Ok(status) => {
            if status == Status::EstimateViolation {
                eprintln!("error: a guaranteed estimate is violated");
            }
            ExitCode::from(status.code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
