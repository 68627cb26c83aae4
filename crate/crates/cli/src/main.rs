use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vortex_cli::commands::{self, Destinations};
use vortex_cli::config::Scenario;
use vortex_cli::output::write_json;
use vortex_cli::verify::{run_suite, SuiteOptions};
use vortex_cli::{CliError, EXIT_OK, EXIT_VERIFY};

/// Planar point-vortex dynamics and their SE(2)-reduced Lie-Poisson form.
#[derive(Debug, Parser)]
#[command(name = "vortex", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario JSON file.
    #[arg(long)]
    config: PathBuf,
    /// Output path, overriding the scenario's `outputs` entry.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the vortex equations in the plane (CSV: t, Re q_j, Im q_j).
    Simulate(Common),
    /// Report K, its determinant, the algebra signature and R drift.
    Reduce(Common),
    /// Integrate the Lie-Poisson system (CSV: t, mu, C1, C2_shape, D, h).
    Lp(Common),
    /// Evaluate C2, h and D on the C1 level set (3 vortices, or 4 with zero total).
    Levelset {
        #[command(flatten)]
        common: Common,
        /// Level value; defaults to C1 of the scenario's initial momentum.
        #[arg(long, allow_hyphen_values = true)]
        c1: Option<f64>,
        /// Grid as `a:b:n,a:b:n,a:b:n` over (mu1, mu2, mu4).
        #[arg(long)]
        grid: Option<String>,
    },
    /// Find the first return of the shape to its initial value.
    Period {
        #[command(flatten)]
        common: Common,
        /// Search horizon; defaults to the end of the scenario's t_span.
        #[arg(long)]
        t_max: Option<f64>,
    },
    /// Run the seeded invariant suite.
    Verify {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Random samples per check.
        #[arg(long, default_value_t = 200)]
        count: usize,
        /// JSON report path.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Simulate(c) => {
            let s = Scenario::load(&c.config)?;
            commands::cmd_simulate(&s, &Destinations::resolve(&s, c.out))
        }
        Command::Reduce(c) => {
            let s = Scenario::load(&c.config)?;
            commands::cmd_reduce(&s, &Destinations::resolve(&s, c.out))
        }
        Command::Lp(c) => {
            let s = Scenario::load(&c.config)?;
            commands::cmd_lp(&s, &Destinations::resolve(&s, c.out))
        }
        Command::Levelset { common, c1, grid } => {
            let s = Scenario::load(&common.config)?;
            commands::cmd_levelset(&s, &Destinations::resolve(&s, common.out), c1, grid.as_deref())
        }
        Command::Period { common, t_max } => {
            let s = Scenario::load(&common.config)?;
            commands::cmd_period(&s, common.out, t_max)
        }
        Command::Verify { seed, count, out, inject_fault } => {
            if count == 0 {
                return Err(CliError::config("--count must be positive"));
            }
            let report = run_suite(&SuiteOptions { seed, count, inject_fault });
            print!("{}", report.table());
            if let Some(path) = &out {
                write_json(Some(path), &report.to_json()).map_err(|e| CliError::io(path, e))?;
            }
            Ok(if report.passed() { EXIT_OK } else { EXIT_VERIFY })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("VORTEX_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { vortex_cli::EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
