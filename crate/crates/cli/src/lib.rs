//! Command-line front end over the certificate, cumulant, planted-model, and
//! experiment modules.
//!
//! Every command reads a flat `key = value` config (file plus flag
//! overrides), writes a `manifest` echoing the fully resolved config, and
//! emits deterministic text outputs: rerunning with the same config produces
//! identical bytes.

mod commands;
mod config;
mod emit;

pub use config::Config;
pub use emit::g17;

use std::fmt;
use std::path::PathBuf;

/// Failures split by exit code: bad usage/config (2) versus runtime (1).
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(speccert_core::Error),
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Run(err) => write!(f, "{err}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl From<speccert_core::Error> for CliError {
    fn from(err: speccert_core::Error) -> Self {
        CliError::Run(err)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(_) | CliError::Io { .. } => 1,
        }
    }
}

pub(crate) fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

const USAGE: &str = "\
speccert <command> [--config <path>] [--key <value>]...

Commands:
  norm      read a SYMTENSOR file, print and record certificate values
  gen       sample a null or planted dataset to samples.csv
  cumulant  estimate an order-3 or order-4 cumulant tensor from a sample CSV
  detect    null-vs-planted detection experiment (raw.csv, summary.csv)
  estgap    estimation-error distribution experiment (raw.csv, summary.csv)
  scaling   error-vs-sample-size sweep with a log-log fit
  lowdeg    evaluate the low-degree bound sum

Flags are `--key value` pairs overriding config-file keys; `--out` sets
`out_dir`. Common keys: seed (default 0), out_dir (required), reps.
Run a command with a missing key to see what it requires.";

/// Parses flags, merges them over the optional config file, and dispatches.
pub fn run_cli(args: &[String]) -> Result<(), CliError> {
    let Some(command) = args.first() else {
        println!("{USAGE}");
        return Ok(());
    };
    if command == "--help" || command == "-h" || command == "help" {
        println!("{USAGE}");
        return Ok(());
    }
    let mut config_path: Option<PathBuf> = None;
    let mut overrides: Vec<(String, String)> = Vec::new();
    let mut it = args[1..].iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            return Err(usage(format!(
                "unexpected argument `{arg}`; flags look like `--key value`"
            )));
        };
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let Some(v) = it.next() else {
                    return Err(usage(format!("flag `--{flag}` needs a value")));
                };
                (flag.to_string(), v.clone())
            }
        };
        match key.as_str() {
            "config" => config_path = Some(PathBuf::from(value)),
            "out" => overrides.push(("out_dir".to_string(), value)),
            _ => overrides.push((key, value)),
        }
    }
    let cfg = Config::from_sources(config_path.as_deref(), &overrides)?;
    commands::run(command, &cfg)
}
