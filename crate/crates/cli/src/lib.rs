//! Command-line front end: experiment subcommands writing CSV and JSON
//! artifacts.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub mod correlate;
pub mod count;
pub mod data;
pub mod estimate;
pub mod evolve;
pub mod output;
pub mod sweep;
pub mod train;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Invalid flags or configuration; exits with [`EXIT_USAGE`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

/// Parses a flag value, turning failures into usage errors.
pub fn parse_flag<T>(name: &str, value: &str) -> Result<T>
where
    T: std::str::FromStr,
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| usage(format!("invalid --{name} {value:?}: {e}")))
}

#[derive(Debug, Parser)]
#[command(name = "causal-pieces", version, about = "Causal-piece analysis of spiking networks")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct Global {
    /// Output directory
    #[arg(long, global = true, env = "PIECES_OUT", default_value = "out")]
    pub out: PathBuf,
    /// JSON file whose keys override the subcommand defaults
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Worker threads (0 uses all cores)
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

impl Global {
    pub fn new(out: &Path, seed: u64) -> Self {
        Self {
            out: out.to_path_buf(),
            config: None,
            threads: 0,
            seed,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate piece counts over a grid of normal weight distributions
    Sweep(sweep::SweepArgs),
    /// Count causal pieces of a network on a dataset
    Count(count::CountArgs),
    /// Correlate initial piece counts with accuracy after training
    Correlate(correlate::CorrelateArgs),
    /// Train a network
    Train(train::TrainArgs),
    /// Search initialization parameters that maximize piece counts
    Evolve(evolve::EvolveArgs),
    /// Evaluate piece-count estimates and bounds
    Estimate(estimate::EstimateArgs),
}

const GLOBAL_KEYS: [&str; 3] = ["out", "threads", "seed"];

/// Overrides `parsed` with config entries whose flags were not given on the
/// command line.
fn merge<T: Serialize + DeserializeOwned>(
    parsed: &T,
    matches: &[&ArgMatches],
    config: &Map<String, Value>,
) -> Result<T> {
    let mut value = serde_json::to_value(parsed)?;
    let obj = value.as_object_mut().expect("arguments serialize to an object");
    for (k, v) in config {
        if !obj.contains_key(k) {
            return Err(usage(format!("unknown config key {k:?}")));
        }
        let from_cli = matches
            .iter()
            .any(|m| m.value_source(k) == Some(ValueSource::CommandLine));
        if !from_cli {
            obj.insert(k.clone(), v.clone());
        }
    }
    serde_json::from_value(value).map_err(|e| usage(format!("invalid config: {e}")))
}

fn load_config(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(usage("config file must hold a JSON object")),
        Err(e) => Err(usage(format!("invalid config {}: {e}", path.display()))),
    }
}

fn execute(matches: &ArgMatches) -> Result<()> {
    let cli = Cli::from_arg_matches(matches).map_err(|e| usage(e.to_string()))?;
    let config = match &cli.global.config {
        Some(p) => load_config(p)?,
        None => Map::new(),
    };
    let (global_cfg, command_cfg): (Map<String, Value>, Map<String, Value>) = config
        .into_iter()
        .partition(|(k, _)| GLOBAL_KEYS.contains(&k.as_str()));
    let (_, sub) = matches.subcommand().expect("a subcommand is required");
    let mut global = merge(&cli.global, &[matches, sub], &global_cfg)?;
    global.config = cli.global.config.clone();
    let sub = &[sub];

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(global.threads)
        .build()
        .context("cannot start thread pool")?;
    pool.install(|| -> Result<()> {
        match &cli.command {
            Command::Sweep(a) => {
                let r = sweep::run(&merge(a, sub, &command_cfg)?, &global)?;
                println!("{} grid points written to {}", r.len(), global.out.display());
            }
            Command::Count(a) => {
                let r = count::run(&merge(a, sub, &command_cfg)?, &global)?;
                println!("{}", serde_json::to_string_pretty(&r.summary())?);
            }
            Command::Correlate(a) => {
                let r = correlate::run(&merge(a, sub, &command_cfg)?, &global)?;
                println!("{}", serde_json::to_string_pretty(&r.summary())?);
            }
            Command::Train(a) => {
                let r = train::run(&merge(a, sub, &command_cfg)?, &global)?;
                println!(
                    "best test accuracy {} at epoch {}",
                    r.metrics.best_test_accuracy.map_or("n/a".into(), |a| format!("{a:.4}")),
                    r.metrics.best_epoch.map_or("n/a".into(), |e| e.to_string()),
                );
            }
            Command::Evolve(a) => {
                let r = evolve::run(&merge(a, sub, &command_cfg)?, &global)?;
                println!("{}", serde_json::to_string_pretty(&r.best)?);
            }
            Command::Estimate(a) => {
                let r = estimate::run(&merge(a, sub, &command_cfg)?, &global)?;
                println!("{}", serde_json::to_string_pretty(&r)?);
            }
        }
        Ok(())
    })
}

/// Runs the tool on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&matches) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                EXIT_USAGE
            } else {
                EXIT_FAILURE
            }
        }
    }
}

/// Full configuration recorded in output headers.
#[derive(Debug, Serialize)]
pub(crate) struct Resolved<'a, A> {
    pub threads: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub args: &'a A,
}

pub(crate) fn out_dir<A: Serialize>(
    command: &str,
    args: &A,
    global: &Global,
) -> Result<output::OutDir> {
    let meta = output::Meta::new(
        command,
        global.seed,
        &Resolved {
            threads: global.threads,
            seed: global.seed,
            args,
        },
    )?;
    output::OutDir::create(&global.out, meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn bad_flags_are_usage_errors() {
        assert_eq!(run(["causal-pieces", "sweep", "--n", "abc"]), EXIT_USAGE);
        assert_eq!(run(["causal-pieces", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["causal-pieces", "--help"]), EXIT_OK);
    }
}
