use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mesure_cli::commands::{
    cmd_bench, cmd_calibrate, cmd_profile, cmd_report, cmd_score, cmd_serve, CliError,
    ConfigOverrides, ReportFormat,
};

/// Smart-card benchmark harness: measure, isolate, and score operation
/// timings against simulated or remote cards.
#[derive(Parser)]
#[command(name = "mesure", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulated card as a TCP service.
    Serve {
        /// Device profile JSON.
        #[arg(long)]
        profile: PathBuf,
        /// Applet suite JSON.
        #[arg(long)]
        suite: PathBuf,
        /// Address to listen on; port 0 picks a free port.
        #[arg(long, default_value = "127.0.0.1:3972")]
        listen: String,
    },
    /// Choose loop sizes for every case without benchmarking.
    Calibrate {
        /// Campaign configuration JSON.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: ConfigOverrides,
    },
    /// Run the full measurement campaign and write results.
    Bench {
        /// Campaign configuration JSON.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: ConfigOverrides,
    },
    /// Turn per-domain trace directories into feature-weight documents.
    Profile {
        /// Directory holding one subdirectory of .trace files per domain.
        traces_dir: PathBuf,
        /// Where the weight documents go.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Mark a card's isolated times against a reference base.
    Score {
        /// Measurement results (or bare isolated-times document) to mark.
        measured: PathBuf,
        /// Reference input; repeat to aggregate several cards into the base.
        #[arg(long, required = true)]
        reference: Vec<PathBuf>,
        /// Domain weight documents; repeatable.
        #[arg(long, required = true)]
        weights: Vec<PathBuf>,
        /// Output scorecard path.
        #[arg(long, default_value = "scorecard.json")]
        out: PathBuf,
        /// Overrides the card identity recorded in the scorecard.
        #[arg(long)]
        card_id: Option<String>,
        /// Aggregate the reference base with a geometric mean.
        #[arg(long)]
        geometric_reference: bool,
        /// Also persist the assembled reference base.
        #[arg(long)]
        write_reference: Option<PathBuf>,
    },
    /// Render a scorecard as JSON or CSV.
    Report {
        scorecard: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: ReportFormat,
        /// Write here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Serve { profile, suite, listen } => cmd_serve(&profile, &suite, &listen),
        Command::Calibrate { config, overrides } => cmd_calibrate(&config, &overrides),
        Command::Bench { config, overrides } => cmd_bench(&config, &overrides),
        Command::Profile { traces_dir, out_dir } => cmd_profile(&traces_dir, &out_dir),
        Command::Score {
            measured,
            reference,
            weights,
            out,
            card_id,
            geometric_reference,
            write_reference,
        } => cmd_score(
            &measured,
            &reference,
            &weights,
            &out,
            card_id.as_deref(),
            geometric_reference,
            write_reference.as_deref(),
        ),
        Command::Report { scorecard, format, out } => {
            cmd_report(&scorecard, format, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::new().filter("MESURE_LOG")).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {:#}", err.inner());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
