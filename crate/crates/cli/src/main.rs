//! `fretsync`: tab tools, oracle playthroughs, scoring and network checks.
//!
//! Results go to stdout as JSON; progress and diagnostics go to stderr.
//! Exit codes: 0 success, 2 invalid input, 3 infeasible tab, 4 failed check.

mod failure;
mod manifest;
mod net;
mod play;
mod tab;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use failure::{CliResult, Failure};

#[derive(Debug, Parser)]
#[command(name = "fretsync", version, about = "Two-hand guitar playing: tabs, oracle runs, scoring and policy checks")]
struct Cli {
    /// Write the run manifest here instead of the command's default location.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Read, transform and retime tabs.
    #[command(subcommand)]
    Tab(tab::TabCommand),
    /// Play a tab with a scripted policy and record both hands.
    Play(play::PlayArgs),
    /// Replay recorded trajectories against a tab and score them.
    Score(play::ScoreArgs),
    /// Policy network utilities.
    #[command(subcommand)]
    Net(net::NetCommand),
}

/// What a command hands back to `main`.
pub struct Outcome {
    pub summary: Value,
    /// The run manifest and its default location. Without a default it is
    /// only written when `--manifest` is given.
    pub manifest: Option<(Option<PathBuf>, manifest::RunManifest)>,
}

impl Outcome {
    pub fn summary(summary: Value) -> Self {
        Outcome { summary, manifest: None }
    }
}

/// Resolves a config path: relative paths are taken against
/// `FRETSYNC_CONFIG_ROOT` when it is set.
pub fn config_path(path: &Path) -> PathBuf {
    match std::env::var_os("FRETSYNC_CONFIG_ROOT") {
        Some(root) if path.is_relative() => Path::new(&root).join(path),
        _ => path.to_path_buf(),
    }
}

pub fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let path = config_path(path);
    let text = std::fs::read_to_string(&path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> CliResult<Value> {
    let outcome = match cli.command {
        Command::Tab(cmd) => tab::run(cmd)?,
        Command::Play(args) => play::play(args)?,
        Command::Score(args) => play::score(args)?,
        Command::Net(cmd) => net::run(cmd)?,
    };
    let mut summary = outcome.summary;
    if let Some((Some(path), manifest)) = outcome.manifest.map(|(d, m)| (cli.manifest.or(d), m)) {
        manifest.write(&path)?;
        if let Value::Object(map) = &mut summary {
            map.insert("manifest".into(), Value::String(path.display().to_string()));
        }
    }
    Ok(summary)
}

/// Prints to stdout, ignoring a closed pipe.
fn emit(value: &Value) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{value:#}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            emit(&summary);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            emit(&e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
