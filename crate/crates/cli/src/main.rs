use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mpflex_cli::commands::{self, parse_theta, Settings, Summary};
use mpflex_cli::instance_file::{load_instance, LoadedInstance};
use mpflex_cli::CliResult;

#[derive(Parser)]
#[command(name = "mpflex", version, about = "Peer-to-peer energy sharing: equilibria, value function and flexibility requirements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Central solution and recovered equilibrium at one parameter value.
    Equilibrium(Common),
    /// Iterated best responses between users and operator.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Round limit.
        #[arg(long)]
        max_rounds: Option<usize>,
    },
    /// Piecewise-affine value function over the parameter box.
    Avg {
        #[command(flatten)]
        common: Common,
        /// Check against direct LP solves on N points per axis.
        #[arg(long, value_name = "N")]
        grid: Option<usize>,
    },
    /// Demand-adjustment range each user must cover.
    Flexibility(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    instance: PathBuf,
    /// Renewable deviations, kW, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<String>,
    /// Approximation tolerance, $.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Breakpoints per user.
    #[arg(long)]
    segments: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

type Runner = fn(&LoadedInstance, &Settings, &std::path::Path) -> CliResult<Summary>;

fn run(cli: Cli) -> CliResult<Summary> {
    let (common, grid, max_rounds, runner): (Common, _, _, Runner) = match cli.command {
        Command::Equilibrium(c) => (c, None, None, commands::cmd_equilibrium),
        Command::Simulate { common, max_rounds } => {
            (common, None, max_rounds, commands::cmd_simulate)
        }
        Command::Avg { common, grid } => (common, grid, None, commands::cmd_avg),
        Command::Flexibility(c) => (c, None, None, commands::cmd_flexibility),
    };
    let inst = load_instance(&common.instance)?;
    let settings = Settings {
        theta: common.theta.as_deref().map(parse_theta).transpose()?,
        epsilon: common.epsilon,
        segments: common.segments,
        grid,
        max_rounds,
    };
    runner(&inst, &settings, &common.out)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(summary) => {
            println!("{}", summary.text);
            for f in &summary.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.reason());
            ExitCode::from(e.exit_code())
        }
    }
}
