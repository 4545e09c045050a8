//! `dynup`: command-line front end for the upgrade-pricing experiment lab.
//!
//! Exit codes: 0 on success, 1 when a simulation invariant or an oracle
//! dominance check fails (or a report cannot be written), 2 on bad
//! configuration.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dynup::experiments::diagnostics::Tracked;
use dynup::policy::PolicySpec;

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 20_240_601;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DYNUP_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] dynup::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(dynup::Error::Invariant { .. }) | CliError::Io { .. } | CliError::Check(_) => 1,
            CliError::Core(_) | CliError::Config(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dynup", version, about = "Online upgrade pricing: simulation, regret and oracle checks")]
struct Cli {
    /// Worker threads for replications (default: available cores).
    #[arg(long, global = true, env = "DYNUP_JOBS")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV, default_value = "dynup-out")]
    out: PathBuf,

    /// Base seed for all replications.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run episodes and write one trace CSV and one summary JSON per seed.
    Simulate {
        /// Instance file (TOML).
        #[arg(long)]
        instance: PathBuf,
        /// dynup2, dynupn, static:<p>[,<p>...] or reject.
        #[arg(long, default_value = "dynup2", value_parser = parse_policy)]
        policy: PolicySpec,
        /// Number of episodes.
        #[arg(long, default_value_t = 1)]
        reps: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Regret against the hybrid benchmark over a sweep of horizons.
    Regret {
        /// Template instance; capacities scale with T at its ratios.
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value = "dynup2", value_parser = parse_policy)]
        policy: PolicySpec,
        /// Replications per horizon.
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
        /// Horizons, comma separated and increasing (at least 4).
        #[arg(long, value_delimiter = ',', default_values_t = [100, 200, 400, 800, 1600, 3200])]
        horizons: Vec<usize>,
        /// Capacity-to-horizon ratios per type (default: from the template).
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
        /// Also write whitespace-separated plot data.
        #[arg(long)]
        plot_data: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Martingale, stopping-time and pricing-loss diagnostics for DynUp-2.
    Diagnostics {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        /// Processes to track (default: all, plus the other diagnostics).
        #[arg(long, value_delimiter = ',')]
        process: Vec<Process>,
        /// Run the depletion-time diagnostic.
        #[arg(long)]
        stopping_time: bool,
        /// Run the pricing-loss diagnostic.
        #[arg(long)]
        pricing_loss: bool,
        /// Tolerance on |tau/T - predicted|.
        #[arg(long, default_value_t = 0.05)]
        eta: f64,
        /// Checkpoints span [1, floor(gamma T)].
        #[arg(long, default_value_t = 0.7)]
        gamma: f64,
        /// Number of checkpoints.
        #[arg(long, default_value_t = 10)]
        checkpoints: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Hindsight bound, exact optimum and DynUp-2 value on a small instance.
    OracleCheck {
        /// Two-type instance (default: a built-in small instance).
        #[arg(long)]
        instance: Option<PathBuf>,
        /// Spacing of the DP's acceptance-probability grid.
        #[arg(long, default_value_t = 0.005)]
        grid_step: f64,
        /// Also write the full DP table.
        #[arg(long)]
        dp_table: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Fit an exponential-power acceptance curve to offer outcomes.
    Calibrate {
        /// CSV of `x,accepted` rows (header optional, accepted in {0,1,true,false}).
        #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
        samples: Option<PathBuf>,
        /// Draw synthetic samples from `a,b` instead.
        #[arg(long, value_delimiter = ',')]
        synthetic: Option<Vec<f64>>,
        /// Synthetic sample count.
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Multi-type hotel study: DynUp-n against a static upgrade price.
    HotelStudy {
        /// Study config (TOML); missing fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Permutations per day (overrides the config).
        #[arg(long)]
        permutations: Option<usize>,
        #[arg(long)]
        plot_data: bool,
        /// Output directory.
        #[arg(long, env = OUT_DIR_ENV, default_value = "dynup-out")]
        out: PathBuf,
        /// Base seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Process {
    Upper,
    Lower,
    Alpha,
}

fn parse_policy(s: &str) -> Result<PolicySpec, String> {
    s.parse().map_err(|e: dynup::Error| e.to_string())
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate {
            instance,
            policy,
            reps,
            common,
        } => commands::simulate(&instance, &policy, reps, common.seed, &common.out),
        Command::Regret {
            instance,
            policy,
            reps,
            horizons,
            ratios,
            plot_data,
            common,
        } => commands::regret(&commands::RegretArgs {
            instance: &instance,
            policy: &policy,
            reps,
            horizons,
            ratios,
            plot_data,
            seed: common.seed,
            out: &common.out,
        }),
        Command::Diagnostics {
            instance,
            reps,
            process,
            stopping_time,
            pricing_loss,
            eta,
            gamma,
            checkpoints,
            common,
        } => {
            let explicit = !process.is_empty() || stopping_time || pricing_loss;
            let tracked = if explicit {
                process
                    .iter()
                    .map(|p| match p {
                        Process::Upper => Tracked::Upper,
                        Process::Lower => Tracked::Lower,
                        Process::Alpha => Tracked::Alpha,
                    })
                    .collect()
            } else {
                vec![Tracked::Upper, Tracked::Lower, Tracked::Alpha]
            };
            commands::diagnostics(&commands::DiagnosticsArgs {
                instance: &instance,
                reps,
                tracked,
                stopping_time: stopping_time || !explicit,
                pricing_loss: pricing_loss || !explicit,
                explicit,
                eta,
                gamma,
                checkpoints,
                seed: common.seed,
                out: &common.out,
            })
        }
        Command::OracleCheck {
            instance,
            grid_step,
            dp_table,
            common,
        } => commands::oracle_check(instance.as_deref(), grid_step, dp_table, &common.out),
        Command::Calibrate {
            samples,
            synthetic,
            n,
            common,
        } => commands::calibrate(samples.as_deref(), synthetic.as_deref(), n, common.seed, &common.out),
        Command::HotelStudy {
            config,
            permutations,
            plot_data,
            out,
            seed,
        } => commands::hotel_study(config.as_deref(), permutations, seed, plot_data, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
