use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tvflow::harness::{
    parse_config, preset, problem_library, run, run_in, Command, HarnessError, RunConfig, EXIT_CONFIG,
};

#[derive(Parser)]
#[command(name = "tvflow", version, about = "Certified solvers for discrete total variation problems and flows")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Minimize the regularized functional with given mu and lambda.
    Elliptic(RunArgs),
    /// Solve the plain total variation problem.
    Tv(RunArgs),
    /// Run the implicit Euler flow and certify every slice.
    Flow(RunArgs),
    /// Sweep the regularization parameter toward zero.
    Sweep(RunArgs),
    /// Re-check a stored solution.json.
    Verify(RunArgs),
    /// Decide membership of a datum in the discrete dual unit ball.
    Feasibility(RunArgs),
    /// List the named problems.
    Presets,
}

#[derive(Args)]
struct RunArgs {
    /// Run config (JSON).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Named problem from the built-in library.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed of the comparison families; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Solver tolerance; overrides the config.
    #[arg(long)]
    tolerance: Option<f64>,
}

fn load(command: Command, args: &RunArgs) -> Result<RunConfig, HarnessError> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => parse_config(path)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => unreachable!("clap requires one of --config and --preset"),
    };
    if cfg.command != command {
        return Err(HarnessError::Validation {
            key: "command".into(),
            message: format!("config is for `{}`, invoked as `{command}`", cfg.command),
        });
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(tol) = args.tolerance {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(HarnessError::Validation {
                key: "tolerance".into(),
                message: format!("must be positive, got {tol}"),
            });
        }
        cfg.solver.tolerance = tol;
    }
    Ok(cfg)
}

fn execute(command: Command, args: &RunArgs) -> i32 {
    let result = load(command, args).and_then(|cfg| match &args.out {
        Some(dir) => run_in(&cfg, dir),
        None => run(&cfg),
    });
    match result {
        Ok(report) => {
            for c in &report.checks {
                let status = if c.passed { "ok  " } else { "FAIL" };
                let detail = c.detail.as_deref().map(|d| format!(" ({d})")).unwrap_or_default();
                println!("{status} {:<20} {:>12.4e} <= {:.4e}{detail}", c.name, c.value, c.limit);
            }
            for c in report.failures() {
                eprintln!("check failed: {} = {:e} exceeds {:e}", c.name, c.value, c.limit);
            }
            println!("{}: {}", command, if report.passed { "pass" } else { "fail" });
            report.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            e.exit_code()
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            return ExitCode::from(code as u8);
        }
    };
    let code = match &cli.command {
        Sub::Presets => {
            for p in problem_library() {
                println!("{:<26} {}", p.name, p.description);
            }
            0
        }
        Sub::Elliptic(a) => execute(Command::Elliptic, a),
        Sub::Tv(a) => execute(Command::Tv, a),
        Sub::Flow(a) => execute(Command::Flow, a),
        Sub::Sweep(a) => execute(Command::Sweep, a),
        Sub::Verify(a) => execute(Command::Verify, a),
        Sub::Feasibility(a) => execute(Command::Feasibility, a),
    };
    ExitCode::from(code as u8)
}
