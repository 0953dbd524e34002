use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mmsim_cli::commands::{self, EvalOptions};
use mmsim_cli::{CliError, RunConfig};
use mmsim_core::env::RewardKind;
use mmsim_core::pipeline::ReplayConfig;
use mmsim_core::synthetic::SyntheticConfig;

#[derive(Parser)]
#[command(name = "mmsim", version, about = "Limit order book market-making simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic mean-reverting tick file.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3600)]
        seconds: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "SYN-USD")]
        instrument: String,
        #[arg(long, default_value = "2024-01-01")]
        date: String,
    },
    /// Replay a tick file into one-second feature snapshots.
    Snapshot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        interval_ms: u64,
    },
    /// Train an agent from a TOML run configuration.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a trained agent over one day and write report and series files.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        action_repeat: Option<usize>,
        #[arg(long, value_parser = parse_reward)]
        reward: Option<RewardKind>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sample actions instead of taking the most likely one.
        #[arg(long)]
        sampled: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print a comparison table of evaluation reports.
    Report {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

fn parse_reward(s: &str) -> Result<RewardKind, String> {
    s.parse()
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth { out, seconds, seed, instrument, date } => {
            let cfg = SyntheticConfig { seconds, seed, instrument, date, ..SyntheticConfig::default() };
            let events = commands::synth(&cfg, &out)?;
            println!("wrote {events} events to {}", out.display());
        }
        Command::Snapshot { input, out, interval_ms } => {
            if interval_ms == 0 {
                return Err(CliError::config("interval_ms must be at least 1"));
            }
            let replay = ReplayConfig { interval_ns: interval_ms as i64 * 1_000_000, ..ReplayConfig::default() };
            let s = commands::snapshot(&input, &out, &replay)?;
            println!(
                "rows {} (skipped {}), events {} (limit {}, cancel {}, market {}, rejected {})",
                s.rows, s.skipped_rows, s.events, s.limit_events, s.cancel_events, s.market_events, s.rejected
            );
        }
        Command::Train { config } => {
            let cfg = RunConfig::load(&config)?;
            let s = commands::train(&cfg)?;
            println!("trained to step {} ({} updates); checkpoint {}", s.step, s.updates, s.checkpoint.display());
        }
        Command::Evaluate { checkpoint, data, action_repeat, reward, out, sampled, seed } => {
            let opts = EvalOptions { checkpoint, data, action_repeat, reward, out, sampled, seed };
            let o = commands::evaluate(&opts)?;
            let r = &o.report.report;
            println!(
                "daily return {:.6}%  avg trade {:.6}%  round trips {}  report {}",
                r.daily_return_pct,
                r.mean_trade_return_pct,
                r.round_trips,
                o.report_path.display()
            );
        }
        Command::Report { files } => {
            print!("{}", commands::format_table(&commands::report_table(&files)?));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
