//! Command-line driver for the interior-point trust-region solver.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use riptrm_cli::commands::{
    self, gradcheck_command, run_command, trs_bench_command, verify_command, CmdError,
    RunSettings, SecondOrderMode,
};
use riptrm_cli::config::parse_config;

#[derive(Parser)]
#[command(
    name = "riptrm",
    version,
    about = "Riemannian primal-dual interior-point trust-region solver"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve a built-in problem and write a CSV trace.
    Run(RunArgs),
    /// Check a finished trace against the solver's invariants.
    Verify(VerifyArgs),
    /// Finite-difference validation of a built-in problem's derivatives.
    Gradcheck(ProblemArgs),
    /// Random trust-region subproblems through all subsolvers + verifier.
    TrsBench(TrsBenchArgs),
}

#[derive(Args)]
struct RunArgs {
    /// rosenbrock-grassmann | stable-linsys | analytic-1d
    #[arg(long)]
    problem: Option<String>,
    /// cauchy | tcg | exact
    #[arg(long)]
    subsolver: Option<String>,
    /// auto | on | off (auto: on exactly for the exact subsolver)
    #[arg(long)]
    second_order: Option<String>,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    budget_s: Option<f64>,
    /// Maximum number of barrier stages.
    #[arg(long)]
    max_outer: Option<usize>,
    /// Stop when the KKT residual total falls below this.
    #[arg(long)]
    target_residual: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Flat key = value settings file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trace CSV path (sidecars <out>.aux and <out>.state are also written).
    #[arg(long, default_value = "trace.csv")]
    out: PathBuf,
    /// Emit a gnuplot script referencing the trace.
    #[arg(long)]
    plot_script: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Trace CSV written by `run`.
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    problem: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ProblemArgs {
    #[arg(long)]
    problem: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrsBenchArgs {
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn settings_from(args: &RunArgs) -> Result<RunSettings, CmdError> {
    let mut settings = RunSettings::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CmdError::Io(format!("reading {}: {e}", path.display())))?;
        let map = parse_config(&text).map_err(CmdError::Usage)?;
        settings.apply_config(&map)?;
    }
    if let Some(p) = &args.problem {
        settings.problem = p.clone();
    }
    if let Some(s) = &args.subsolver {
        settings.subsolver = s.parse().map_err(CmdError::Usage)?;
    }
    if let Some(s) = &args.second_order {
        settings.second_order = s.parse::<SecondOrderMode>().map_err(CmdError::Usage)?;
    }
    if let Some(b) = args.budget_s {
        settings.budget_s = Some(b);
    }
    if let Some(m) = args.max_outer {
        settings.max_outer = Some(m);
    }
    if let Some(t) = args.target_residual {
        settings.target_residual = t;
    }
    if let Some(s) = args.seed {
        settings.seed = s;
    }
    Ok(settings)
}

fn dispatch(cli: Cli) -> Result<(), CmdError> {
    match cli.cmd {
        Cmd::Run(args) => {
            let settings = settings_from(&args)?;
            let output = run_command(&settings, &args.out, args.plot_script.as_ref())?;
            println!(
                "reason: {}; rows: {}; final residual: {}",
                output.result.reason,
                output.records.len(),
                output.final_residual
            );
            Ok(())
        }
        Cmd::Verify(args) => {
            verify_command(&args.problem, args.seed, &args.trace)?;
            println!("trace verified");
            Ok(())
        }
        Cmd::Gradcheck(args) => gradcheck_command(&args.problem, args.seed),
        Cmd::TrsBench(args) => trs_bench_command(args.count, args.seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            commands::log_debug(&format!("error: {err}"));
            eprintln!("{err}");
            ExitCode::from(err.exit_code())
        }
    }
}
