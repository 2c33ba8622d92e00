mod args;
mod commands;

use std::ffi::OsString;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use feedback_core::Error;

use args::{Cli, Command};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Turns `key = value` lines into `--key value` arguments. `true`/`false`
/// values toggle switches; `#` starts a comment.
fn config_args(path: &Path) -> Result<Vec<OsString>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{}:{}: expected key = value", path.display(), n + 1))?;
        let flag = format!("--{}", key.trim().trim_start_matches("--").replace('_', "-"));
        match value.trim() {
            "true" => out.push(flag.into()),
            "false" => {}
            v => {
                out.push(flag.into());
                out.push(v.into());
            }
        }
    }
    Ok(out)
}

/// Inserts config-file flags right after the subcommand so that flags given
/// on the command line, which come later, win.
fn merged_args(raw: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let mut config = None;
    let mut i = 1;
    while i < raw.len() {
        let arg = raw[i].to_string_lossy();
        if arg == "--config" {
            config = raw.get(i + 1).map(|p| p.clone().into());
            break;
        }
        if let Some(p) = arg.strip_prefix("--config=") {
            config = Some(std::path::PathBuf::from(p));
            break;
        }
        i += 1;
    }
    let Some(config) = config else { return Ok(raw) };
    let extra = config_args(&config)?;
    let mut sub = None;
    let mut j = 1;
    while j < raw.len() {
        let s = raw[j].to_string_lossy();
        if s == "--config" {
            j += 2;
            continue;
        }
        if !s.starts_with('-') {
            sub = Some(j);
            break;
        }
        j += 1;
    }
    let Some(sub) = sub else { return Ok(raw) };
    let mut out = raw[..=sub].to_vec();
    out.extend(extra);
    out.extend_from_slice(&raw[sub + 1..]);
    Ok(out)
}

fn main() -> ExitCode {
    let raw: Vec<OsString> = std::env::args_os().collect();
    let args = match merged_args(raw) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Split(a) => commands::split(a),
        Command::Stats(a) => commands::stats(a),
        Command::TrainEmbeddings(a) => commands::train_embeddings(a),
        Command::Run(a) => commands::run(a),
        Command::Grid(a) => commands::grid(a),
        Command::Predict(a) => commands::predict(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_DATA })
        }
    }
}
