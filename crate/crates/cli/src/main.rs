use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ristrack::config::ExperimentConfig;
use ristrack::{inspect, oracle_gen, reports, Profile};

#[derive(Parser)]
#[command(
    name = "ristrack",
    version,
    about = "Surface phase-shift tracking experiments: channel simulation, reservoir forecasting, spectral-efficiency evaluation"
)]
struct Cli {
    /// TOML experiment configuration overlaying the profile defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; every stochastic stage derives its stream from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for report files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Base defaults: `desk` runs in minutes, `paper` is full scale.
    #[arg(long, global = true, value_enum, default_value_t = Profile::Desk)]
    profile: Profile,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Readout-training diagnostics: RMSE vs training length and batch losses.
    TrainReport,
    /// Dispersion (tau1/tau2) of the predictor schemes across seeds.
    VarianceReport,
    /// Tracked-segment fit plus closed-loop forecast of the strong learner.
    TrackingReport,
    /// Sum-SE sweeps over the user count and the surface size.
    SeSweep,
    /// Generate a channel trajectory and its per-slot oracle phases.
    OracleGen,
    /// Model container utilities.
    Model {
        #[command(subcommand)]
        cmd: ModelCommand,
    },
}

#[derive(Subcommand)]
enum ModelCommand {
    /// Print the metadata of a saved model or ensemble.
    Inspect { path: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let cfg = match ExperimentConfig::resolve(
        cli.profile,
        cli.config.as_deref(),
        cli.seed,
        cli.out.as_deref(),
    ) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };

    let outcome = match cli.command {
        Command::TrainReport => reports::run_training_report(&cfg),
        Command::VarianceReport => reports::run_variance_report(&cfg).map(|o| o.paths),
        Command::TrackingReport => reports::run_tracking_report(&cfg).map(|o| o.paths),
        Command::SeSweep => reports::run_se_sweeps(&cfg).map(|o| o.paths),
        Command::OracleGen => oracle_gen::run_oracle_gen(&cfg),
        Command::Model {
            cmd: ModelCommand::Inspect { path },
        } => match inspect::inspect(&path) {
            Ok(text) => {
                print!("{text}");
                return ExitCode::SUCCESS;
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::FAILURE;
            }
        },
    };

    match outcome {
        Ok(paths) => {
            for path in paths {
                println!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
