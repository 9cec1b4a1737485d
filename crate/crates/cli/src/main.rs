use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ecorl_cli::commands::{self, EnvKind, GridSpec};
use ecorl_cli::config::RunConfig;
use ecorl_cli::policies::PolicySpec;
use ecorl_cli::CliError;

#[derive(Parser)]
#[command(
    name = "ecorl",
    about = "Train, solve, and compare policies for ecological decision problems",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML config; unknown keys are rejected
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config entry, e.g. --set td3.actor_lr=1e-4 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Master seed for environments, agents, and evaluation replicates
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory for artifacts and the run manifest
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent and write its learning curve and actor snapshot
    Train {
        #[arg(value_enum)]
        env: EnvKind,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Roll out a policy over replicate episodes and summarize per-step state
    Evaluate {
        #[arg(value_enum)]
        env: EnvKind,
        /// escapement:<t>, steady-state[:<a>], actor:<path>, or mdp
        #[arg(long)]
        policy: PolicySpec,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Random-search hyperparameters at a reduced step budget
    Tune {
        #[arg(value_enum)]
        env: EnvKind,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Tabulate a policy's action over a sweep of the first observation
    PolicyCurve {
        #[arg(value_enum)]
        env: EnvKind,
        /// escapement:<t>, steady-state[:<a>], actor:<path>, or mdp
        #[arg(long)]
        policy: PolicySpec,
        /// Observation sweep as lo:hi:points
        #[arg(long)]
        grid: GridSpec,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Map ecosystem equilibria against mortality and locate the folds
    Bifurcation {
        /// Upper end of the mortality scan (the scan starts at 0)
        #[arg(long, default_value_t = 1.0)]
        m_max: f64,
        /// Number of mortality values in the scan
        #[arg(long, default_value_t = 501)]
        m_points: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Solve the discretized harvest problem by value iteration
    SolveMdp {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Turn a historical stock CSV into per-year quota recommendations
    Recommend {
        /// CSV with year,biomass,catch columns
        #[arg(long)]
        stock: PathBuf,
        /// Carrying-capacity estimate used to normalize biomass
        #[arg(long)]
        k_estimate: f64,
        /// escapement:<t>, steady-state[:<a>], actor:<path>, or mdp
        #[arg(long)]
        policy: PolicySpec,
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn run() -> Result<(), CliError> {
    let cli = Cli::try_parse().map_err(|err| {
        // Help and version requests print through clap and succeed.
        if err.use_stderr() {
            let rendered = err.to_string();
            CliError::validation(rendered.trim_start_matches("error: ").trim_end().to_string())
        } else {
            let _ = err.print();
            CliError::Exit
        }
    })?;

    match &cli.command {
        Command::Train { env, common } => {
            let config = load(common)?;
            commands::train_cmd(*env, &config, common.seed, &common.out)
        }
        Command::Evaluate { env, policy, common } => {
            let config = load(common)?;
            commands::evaluate_cmd(*env, policy, &config, common.seed, &common.out)
        }
        Command::Tune { env, common } => {
            let config = load(common)?;
            commands::tune_cmd(*env, &config, common.seed, &common.out)
        }
        Command::PolicyCurve { env, policy, grid, common } => {
            let config = load(common)?;
            commands::policy_curve_cmd(*env, policy, grid, &config, common.seed, &common.out)
        }
        Command::Bifurcation { m_max, m_points, common } => {
            let config = load(common)?;
            commands::bifurcation_cmd(&config, *m_max, *m_points, common.seed, &common.out)
        }
        Command::SolveMdp { common } => {
            let config = load(common)?;
            commands::solve_mdp_cmd(&config, common.seed, &common.out)
        }
        Command::Recommend { stock, k_estimate, policy, common } => {
            let config = load(common)?;
            commands::recommend_cmd(stock, *k_estimate, policy, &config, common.seed, &common.out)
        }
    }
}

fn load(common: &CommonArgs) -> Result<RunConfig, CliError> {
    RunConfig::load(common.config.as_deref(), &common.set)
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Exit) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
