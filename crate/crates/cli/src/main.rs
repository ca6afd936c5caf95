use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qtrack_cli::{cmd_check, cmd_montecarlo, cmd_simulate, Overrides};

#[derive(Parser)]
#[command(name = "qtrack", version, about = "Adaptive tracking under quantized observations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config
    config: PathBuf,
    /// Override `master_seed`
    #[arg(long)]
    seed: Option<u64>,
    /// Override the horizon K
    #[arg(long)]
    horizon: Option<usize>,
    /// Load a named quantizer preset (`standard`)
    #[arg(long)]
    quantizer_preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial and write trial.csv
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, short, default_value = "out")]
        out: PathBuf,
    },
    /// Run the Monte Carlo experiment and write curve and summary CSVs
    Montecarlo {
        #[command(flatten)]
        common: Common,
        #[arg(long, short, default_value = "out")]
        out: PathBuf,
        /// Override the number of trials R
        #[arg(long)]
        trials: Option<usize>,
        /// Worker threads (defaults to QTRACK_WORKERS, then all cores)
        #[arg(long)]
        workers: Option<usize>,
        /// Skip simulation and fit the slope of mse(k) = k^-p
        #[arg(long)]
        synthetic_power: Option<f64>,
    },
    /// Print the assumption and constant table for a config
    Check {
        #[command(flatten)]
        common: Common,
    },
}

fn overrides(common: &Common, trials: Option<usize>) -> Overrides {
    Overrides {
        seed: common.seed,
        horizon: common.horizon,
        trials,
        quantizer_preset: common.quantizer_preset.clone(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { common, out } => cmd_simulate(&common.config, out, &overrides(common, None)),
        Command::Montecarlo {
            common,
            out,
            trials,
            workers,
            synthetic_power,
        } => cmd_montecarlo(
            &common.config,
            out,
            &overrides(common, *trials),
            *synthetic_power,
            *workers,
        )
        .map(|_| ()),
        Command::Check { common } => cmd_check(&common.config, &overrides(common, None)).map(|_| ()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
