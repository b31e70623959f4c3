//! Command-line front end: `extract`, `evaluate` and `analyze`.
//!
//! Data goes to files only; logs go to standard error. The exit status is
//! 0 for a clean run, 2 when some images or records failed and were
//! skipped, and 1 when the run could not proceed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use crate::config::{ConfigError, PipelineConfig};
use crate::pipeline::{
    default_filtered_path, run_analyze, run_evaluate, run_extract, PipelineError,
};

#[derive(Debug, Parser)]
#[command(
    name = "reviewscope",
    version,
    about = "Structured reviews from review-page screenshots"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads (overrides the config).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect, recognize and assemble reviews from a directory of images.
    Extract {
        #[command(flatten)]
        common: Common,
        /// Image directory; subdirectory names become the platform.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Record file to write.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score detection files against YOLO ground truth.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        predictions: PathBuf,
        /// Directory of YOLO `.txt` files plus `manifest.txt`.
        #[arg(long = "ground-truth")]
        ground_truth: PathBuf,
        /// Report file to write.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Annotate a record file and apply the veracity filter.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Record file to read.
        #[arg(long)]
        input: PathBuf,
        /// Annotated record file to write.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Filtered record file (default: `<output stem>.filtered.jsonl`).
        #[arg(long)]
        filtered: Option<PathBuf>,
        #[arg(long = "drop-inconsistent")]
        drop_inconsistent: bool,
        #[arg(long = "drop-fake")]
        drop_fake: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Clean,
    Partial,
}

impl From<RunStatus> for ExitCode {
    fn from(s: RunStatus) -> Self {
        match s {
            RunStatus::Clean => ExitCode::SUCCESS,
            RunStatus::Partial => ExitCode::from(2),
        }
    }
}

fn load_config(common: &Common) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn required(path: Option<PathBuf>, what: &str) -> Result<PathBuf, PipelineError> {
    path.ok_or_else(|| {
        ConfigError::Invalid(format!(
            "no {what} given on the command line or in the config"
        ))
        .into()
    })
}

pub fn run(cli: Cli) -> Result<RunStatus, PipelineError> {
    let status = |failed: bool| {
        if failed {
            RunStatus::Partial
        } else {
            RunStatus::Clean
        }
    };
    match cli.command {
        Command::Extract {
            common,
            input,
            output,
        } => {
            let cfg = load_config(&common)?;
            let input = required(input.or_else(|| cfg.input_dir.clone()), "--input")?;
            let output = required(output.or_else(|| cfg.outputs.records.clone()), "--output")?;
            let outcome = run_extract(&cfg, &input, &output)?;
            Ok(status(!outcome.failures.is_empty()))
        }
        Command::Evaluate {
            common,
            predictions,
            ground_truth,
            output,
        } => {
            let cfg = load_config(&common)?;
            let output = required(output.or_else(|| cfg.outputs.report.clone()), "--output")?;
            run_evaluate(&cfg, &predictions, &ground_truth, &output)?;
            Ok(RunStatus::Clean)
        }
        Command::Analyze {
            common,
            input,
            output,
            filtered,
            drop_inconsistent,
            drop_fake,
        } => {
            let mut cfg = load_config(&common)?;
            cfg.filter.drop_inconsistent |= drop_inconsistent;
            cfg.filter.drop_fake |= drop_fake;
            let output = required(output.or_else(|| cfg.outputs.annotated.clone()), "--output")?;
            let filtered = filtered
                .or_else(|| cfg.outputs.filtered.clone())
                .unwrap_or_else(|| default_filtered_path(&output));
            let outcome = run_analyze(&cfg, &input, &output, &filtered)?;
            Ok(status(!outcome.failures.is_empty()))
        }
    }
}

/// Parses arguments, runs the command and maps the result to an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(status) => status.into(),
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}
