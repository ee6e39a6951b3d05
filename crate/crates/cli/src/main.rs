use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

#[derive(Parser)]
#[command(name = "pkf", version, about = "Permanent-weighted Kalman filter experiments and MOT tracker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON config, or a manifest written by an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base seed; seed i of a run uses `seed + i`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker cap; 0 uses every core.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct ScenarioFlags {
    /// Comma-separated methods out of binary, pmht, jpdaf, pkf, or `all`.
    #[arg(long)]
    pub methods: Option<String>,
    #[arg(long)]
    pub objects: Option<usize>,
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub p_detect: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Tracking errors per method over seeded clutter scenarios (table1.csv).
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        scenario: ScenarioFlags,
        /// Measurement noise variance.
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Error and failed tracks against measurement noise (fig4.csv).
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        scenario: ScenarioFlags,
        /// Comma-separated noise variances.
        #[arg(long)]
        levels: Option<String>,
    },
    /// Update time per frame against object count (table2.csv).
    Bench {
        #[command(flatten)]
        common: Common,
        /// Comma-separated object counts.
        #[arg(long)]
        objects: Option<String>,
        #[arg(long)]
        repetitions: Option<usize>,
    },
    /// Tracks a MOT-Challenge detection file.
    Track {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        tracker: commands::TrackFlags,
    },
    /// Oracle checks at small sizes.
    Selftest {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Also write the outcome table and a manifest here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<pkf::Error> for Failure {
    fn from(e: pkf::Error) -> Self {
        use pkf::Error::*;
        use std::io::ErrorKind;
        let code = match &e {
            Parse { .. } | Config(_) | InvalidDetection(_) | Json(_) => 2,
            Io(io) if matches!(io.kind(), ErrorKind::NotFound | ErrorKind::InvalidData) => 2,
            _ => 1,
        };
        Self { code, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PKF_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { common, scenario, noise } => commands::simulate(&common, &scenario, noise),
        Command::Sweep { common, scenario, levels } => commands::sweep(&common, &scenario, levels.as_deref()),
        Command::Bench { common, objects, repetitions } => commands::bench(&common, objects.as_deref(), repetitions),
        Command::Track { common, tracker } => commands::track(&common, &tracker),
        Command::Selftest { seed, out } => commands::selftest(seed, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
