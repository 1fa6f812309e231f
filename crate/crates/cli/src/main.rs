mod commands;
mod config;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Prediction-reward bound verification and deep anticipatory network
/// training on desk-scale tracking and attention tasks.
#[derive(Parser)]
#[command(name = "dan", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sweep the belief simplex and verify the tangent-bound gap theorem.
    VerifyBounds {
        /// Number of target values.
        #[arg(long)]
        ny: usize,
        /// Reward for a correct prediction (r').
        #[arg(long)]
        r_correct: f64,
        /// Reward for an incorrect prediction (r'').
        #[arg(long)]
        r_incorrect: f64,
        /// Sampler: `grid:STEP` or `random:N`.
        #[arg(long, default_value = "grid:0.01")]
        sampler: String,
        /// Seed for the random sampler.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate datasets (tracking tracks or glyph images).
    #[command(subcommand)]
    GenData(GenData),
    /// Train agents and write curves, events and checkpoints.
    #[command(subcommand)]
    Train(Train),
    /// Evaluate a trained checkpoint directory on a dataset file.
    Eval {
        /// Output directory of a previous `train` run.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Tracks (.jsonl) or glyphs (.json) to evaluate on.
        #[arg(long)]
        data: PathBuf,
        /// Number of simultaneously tracked people.
        #[arg(long, default_value_t = 1)]
        multi_person: usize,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Finite-difference check of the network gradients.
    GradCheck {
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 12345)]
        seed: u64,
        /// Test hook: flip one gradient sign; the check must then fail.
        #[arg(long, hide = true, default_value_t = false)]
        inject_flip: bool,
    },
}

#[derive(Subcommand)]
enum GenData {
    /// Random-walk tracks plus a camera layout.
    Tracking {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// The synthetic glyph image dataset.
    Glyphs {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum Train {
    /// Train the per-axis camera-selection agents.
    Tracking {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the glimpse-attention agent.
    Attention {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Override the configured reward schedule.
        #[arg(long, value_parser = ["continuous", "terminal"])]
        reward: Option<String>,
    },
}

/// Exit codes: 0 success, 1 usage/config error, 2 verification failure.
fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let outcome = match cli.cmd {
        Cmd::VerifyBounds { ny, r_correct, r_incorrect, sampler, seed, out } => {
            commands::verify_bounds(ny, r_correct, r_incorrect, &sampler, seed, out.as_deref())
        }
        Cmd::GenData(GenData::Tracking { config, seed, out }) => {
            commands::gen_tracking(config.as_deref(), seed, &out)
        }
        Cmd::GenData(GenData::Glyphs { config, seed, out }) => {
            commands::gen_glyphs(config.as_deref(), seed, &out)
        }
        Cmd::Train(Train::Tracking { config, seed, out }) => {
            commands::train_tracking(config.as_deref(), seed, &out)
        }
        Cmd::Train(Train::Attention { config, seed, out, reward }) => {
            commands::train_attention(config.as_deref(), seed, &out, reward.as_deref())
        }
        Cmd::Eval { checkpoint, data, multi_person, episodes, seed } => {
            commands::eval(&checkpoint, &data, multi_person, episodes, seed)
        }
        Cmd::GradCheck { trials, seed, inject_flip } => commands::grad_check(trials, seed, inject_flip),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
