use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use crate::commands;
use crate::config::ConfigLayers;
use crate::{CliError, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(
    name = "polprog",
    version,
    about = "Predict the legislative stage of climate policies from text and metadata",
    after_help = "Exit codes: 0 success, 1 validation error, 2 runtime error, 64 usage error.\n\
                  Run directories go under --out, the POLPROG_OUT environment variable, or ./runs."
)]
pub struct Cli {
    /// Base seed; every random stream is derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// JSON config file with dotted keys (nested objects are flattened).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Override one config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,

    /// Worker threads for grid cells, trees and attributions.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    /// Print the config hash and the hashes of all data files first.
    #[arg(long, global = true)]
    pub provenance: bool,

    /// Root directory for run outputs.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct Inputs {
    /// Corpus in JSONL, one policy per line.
    #[arg(long, value_name = "FILE")]
    pub corpus: Option<PathBuf>,

    /// Embedding sidecar for a representation; repeatable.
    #[arg(long = "embedding", value_name = "REP=FILE")]
    pub embeddings: Vec<String>,

    /// Sidecar score CSV keyed by policy id.
    #[arg(long, value_name = "FILE")]
    pub sidecar_scores: Option<PathBuf>,

    /// Representations to evaluate (tfidf, embedding_a, embedding_b).
    #[arg(long = "representation", value_name = "REP", value_delimiter = ',')]
    pub representations: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a corpus and the configured side files; print a summary.
    Validate(Inputs),
    /// Write a planted-signal synthetic corpus.
    Synth {
        #[arg(long, default_value_t = 300)]
        n: usize,
        /// Filler vocabulary size.
        #[arg(long, default_value_t = 200)]
        vocab: usize,
        /// Output JSONL path; an existing file is never replaced.
        #[arg(long, short, value_name = "FILE")]
        output: PathBuf,
    },
    /// Evaluate every representation × model × feature-set cell.
    Grid(Inputs),
    /// Permutation importance and SHAP values on the test split.
    Explain(Inputs),
    /// Render tables and charts from earlier run directories.
    Report {
        /// Run directory holding grid.csv, importance.csv or shap.csv; repeatable.
        #[arg(long = "from", value_name = "DIR", required = true)]
        inputs: Vec<PathBuf>,
    },
    /// grid, explain and report into one run directory.
    All(Inputs),
}

impl Cli {
    /// Defaults < config file < `--set` < dedicated flags.
    pub fn layers(&self) -> Result<ConfigLayers, CliError> {
        let mut layers = ConfigLayers::new();
        if let Some(path) = &self.config {
            layers.load_file(path)?;
        }
        for pair in &self.set {
            layers.set_pair(pair)?;
        }
        if let Some(seed) = self.seed {
            layers.set("seed", Value::from(seed));
        }
        if let Some(jobs) = self.jobs {
            layers.set("jobs", Value::from(jobs));
        }
        if let Some(out) = &self.out {
            layers.set("output", Value::from(out.display().to_string()));
        }
        let inputs = match &self.command {
            Command::Validate(i) | Command::Grid(i) | Command::Explain(i) | Command::All(i) => Some(i),
            _ => None,
        };
        if let Some(i) = inputs {
            if let Some(c) = &i.corpus {
                layers.set("corpus", Value::from(c.display().to_string()));
            }
            if let Some(s) = &i.sidecar_scores {
                layers.set("sidecar_scores", Value::from(s.display().to_string()));
            }
            for pair in &i.embeddings {
                let (rep, path) = pair
                    .split_once('=')
                    .ok_or_else(|| CliError::Validation(format!("--embedding expects REP=FILE, got {pair:?}")))?;
                layers.set(&format!("embeddings.{}", rep.trim()), Value::from(path));
            }
            if !i.representations.is_empty() {
                let joined = Value::from(i.representations.join(","));
                match &self.command {
                    Command::Explain(_) => {
                        if i.representations.len() != 1 {
                            return Err(CliError::Validation("explain takes a single --representation".into()));
                        }
                        layers.set("explain.representation", joined);
                    }
                    _ => layers.set("grid.representations", joined),
                }
            }
        }
        Ok(layers)
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = cli.layers()?.resolve()?;
    if let Some(n) = cfg.jobs {
        // a pool configured earlier in this process stays in place
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    if cli.provenance {
        commands::print_provenance(&cfg, out)?;
    }
    match &cli.command {
        Command::Validate(_) => commands::validate(&cfg, out),
        Command::Synth { n, vocab, output } => commands::synth(&cfg, *n, *vocab, output, out),
        Command::Grid(_) => commands::grid(&cfg, out).map(drop),
        Command::Explain(_) => commands::explain(&cfg, out).map(drop),
        Command::Report { inputs } => commands::report(&cfg, inputs, out).map(drop),
        Command::All(_) => commands::all(&cfg, out).map(drop),
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
