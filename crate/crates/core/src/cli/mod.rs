//! Command-line front end. Flag values resolve as command line, then
//! environment, then `--config` file, then built-in default.

mod analyze;
mod collect;
mod data;
mod sim;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Timezone fallback when `--tz` is not given.
pub const TZ_ENV: &str = "TRAFFIC_TZ";

#[derive(Debug, Parser)]
#[command(name = "trafficlens", version, about = "Traffic camera collection and peak hour differential analysis")]
pub struct Cli {
    /// JSON file whose keys mirror the long flag names
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Poll cameras, detect vehicles and append counts to the database
    Collect(CollectArgs),
    /// Compute peak hour differentials from stored counts
    Analyze(AnalyzeArgs),
    /// Summarize an analysis CSV as a table or CSV, optionally with hourly means
    Report(ReportArgs),
    /// Serve a simulated camera fleet
    Camsim(CamsimArgs),
    /// Append rows from a detections CSV to the database
    Import(ImportArgs),
    /// Write every stored row as CSV
    Export(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Stub,
    Subprocess,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Table,
    Csv,
}

#[derive(Debug, Args)]
pub struct CollectArgs {
    /// Camera list JSON
    #[arg(long, value_name = "PATH")]
    pub cameras: Option<PathBuf>,
    /// SQLite database, created if missing
    #[arg(long, value_name = "PATH")]
    pub db: Option<PathBuf>,
    /// Detector backend (default stub)
    #[arg(long, value_enum)]
    pub detector: Option<DetectorKind>,
    /// Worker executable for `--detector subprocess`
    #[arg(long, value_name = "PROGRAM")]
    pub detector_cmd: Option<String>,
    /// Argument passed to the worker; repeatable
    #[arg(long = "detector-arg", value_name = "ARG", allow_hyphen_values = true)]
    pub detector_args: Vec<String>,
    /// Per-batch worker reply timeout
    #[arg(long, value_name = "MS")]
    pub detector_timeout_ms: Option<u64>,
    /// Concurrent download workers (default 16, env COLLECTOR_WORKERS)
    #[arg(long)]
    pub workers: Option<usize>,
    /// Frames per detector batch (default 64)
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Frames slower than this are discarded (default 100)
    #[arg(long, value_name = "MS")]
    pub download_timeout_ms: Option<f64>,
    /// Flush a partial batch after this long (default 250)
    #[arg(long, value_name = "MS")]
    pub batch_max_wait_ms: Option<f64>,
    /// Frames buffered between downloads and batching (default 256)
    #[arg(long)]
    pub queue_capacity: Option<usize>,
    /// Attempts per batch for retriable detect/store failures (default 3)
    #[arg(long)]
    pub sink_retries: Option<u32>,
    /// Detection confidence threshold in (0, 1]
    #[arg(long)]
    pub threshold: Option<f32>,
    /// Stop after this many milliseconds instead of waiting for Ctrl-C
    #[arg(long, value_name = "MS")]
    pub duration_ms: Option<u64>,
    /// Print counters to stderr this often
    #[arg(long, value_name = "MS")]
    pub stats_interval_ms: Option<u64>,
    /// Shared virtual clock written by `camsim --clock-file`
    #[arg(long, value_name = "PATH")]
    pub clock_file: Option<PathBuf>,
    /// Print the resolved configuration as JSON and exit
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long, value_name = "PATH")]
    pub db: Option<PathBuf>,
    /// Split instant: YYYY-MM-DD (local midnight), local date-time, or RFC 3339
    #[arg(long)]
    pub split: Option<String>,
    /// IANA timezone for hours and day types
    #[arg(long)]
    pub tz: Option<String>,
    /// Rolling mean length in samples
    #[arg(long)]
    pub window_size: Option<usize>,
    /// Peak windows as `Label=start-end,...`
    #[arg(long)]
    pub windows: Option<String>,
    /// `total` or a single class name
    #[arg(long)]
    pub class: Option<String>,
    /// Restrict to rows from one detector model
    #[arg(long)]
    pub model_id: Option<String>,
    /// Report CSV destination; stdout when omitted
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Also write the partitioned hourly means
    #[arg(long, value_name = "PATH")]
    pub means_output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Analysis CSV written by `analyze`
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Output format (default table)
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Hourly means CSV written by `analyze --means-output`
    #[arg(long, value_name = "PATH")]
    pub means: Option<PathBuf>,
    /// Windows for `--hourly-output` as `Label=start-end,...`
    #[arg(long)]
    pub windows: Option<String>,
    /// Per (source, window) hourly mean CSV for plotting; needs `--means`
    #[arg(long, value_name = "PATH")]
    pub hourly_output: Option<PathBuf>,
    /// Destination; stdout when omitted
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CamsimArgs {
    /// Simulator JSON (scenario or explicit camera specs)
    #[arg(long, value_name = "PATH")]
    pub scenario_file: Option<PathBuf>,
    /// step-change, flat or weekend-only-shift
    #[arg(long)]
    pub scenario: Option<String>,
    /// Fleet size for a named scenario (default 10)
    #[arg(long)]
    pub num_cameras: Option<usize>,
    /// Signed count change after the split (default -3)
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<i64>,
    /// Listen address (default 127.0.0.1)
    #[arg(long)]
    pub bind: Option<String>,
    /// Listen port, 0 for any (default 8080)
    #[arg(long)]
    pub port: Option<u16>,
    /// Write a camera list for `collect --cameras`
    #[arg(long, value_name = "PATH")]
    pub cameras_out: Option<PathBuf>,
    /// Poll interval written into `--cameras-out`
    #[arg(long, value_name = "MS")]
    pub poll_interval_ms: Option<u64>,
    /// Write the virtual clock for `collect --clock-file`
    #[arg(long, value_name = "PATH")]
    pub clock_file: Option<PathBuf>,
    /// Virtual seconds per real second
    #[arg(long)]
    pub speedup: Option<f64>,
    /// RFC 3339 instant the virtual clock starts at
    #[arg(long)]
    pub virtual_origin: Option<String>,
    /// Stop after this many milliseconds instead of waiting for Ctrl-C
    #[arg(long, value_name = "MS")]
    pub duration_ms: Option<u64>,
    /// Seed for latency and fault sampling
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    #[arg(long, value_name = "PATH")]
    pub db: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long, value_name = "PATH")]
    pub db: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

/// Contents of `--config`: every key is optional and named after its flag.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub cameras: Option<PathBuf>,
    pub db: Option<PathBuf>,
    pub detector: Option<DetectorKind>,
    pub detector_cmd: Option<String>,
    pub detector_args: Option<Vec<String>>,
    pub detector_timeout_ms: Option<u64>,
    pub workers: Option<usize>,
    pub batch_size: Option<usize>,
    pub download_timeout_ms: Option<f64>,
    pub batch_max_wait_ms: Option<f64>,
    pub queue_capacity: Option<usize>,
    pub sink_retries: Option<u32>,
    pub threshold: Option<f32>,
    pub duration_ms: Option<u64>,
    pub stats_interval_ms: Option<u64>,
    pub clock_file: Option<PathBuf>,
    pub split: Option<String>,
    pub tz: Option<String>,
    pub window_size: Option<usize>,
    pub windows: Option<String>,
    pub class: Option<String>,
    pub model_id: Option<String>,
    pub output: Option<PathBuf>,
    pub means_output: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub means: Option<PathBuf>,
    pub hourly_output: Option<PathBuf>,
    pub scenario_file: Option<PathBuf>,
    pub scenario: Option<String>,
    pub num_cameras: Option<usize>,
    pub delta: Option<i64>,
    pub bind: Option<String>,
    pub port: Option<u16>,
    pub cameras_out: Option<PathBuf>,
    pub poll_interval_ms: Option<u64>,
    pub speedup: Option<f64>,
    pub virtual_origin: Option<String>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let raw = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&raw).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration; exit code 2.
    Usage(String),
    /// Failure while doing the work; exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

pub(crate) fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

pub(crate) fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

/// Error for a flag that is neither on the command line nor in the config.
pub(crate) fn missing(subcommand: &str, flag: &str) -> CliError {
    let mut cmd = Cli::command();
    let text = match cmd.find_subcommand_mut(subcommand) {
        Some(sub) => sub.render_usage().to_string(),
        None => String::new(),
    };
    CliError::Usage(format!("--{flag} is required\n\n{text}"))
}

/// First present value of command line, then config file.
pub(crate) fn pick<T: Clone>(cli: &Option<T>, file: &Option<T>) -> Option<T> {
    cli.clone().or_else(|| file.clone())
}

pub(crate) fn env_value(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.is_empty())
}

/// Opens `path` for writing, or stdout when absent.
pub(crate) fn output_sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| runtime(format!("cannot create {}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Collect(args) => collect::run(args, &file),
        Command::Analyze(args) => analyze::run_analyze(args, &file),
        Command::Report(args) => analyze::run_report(args, &file),
        Command::Camsim(args) => sim::run(args, &file),
        Command::Import(args) => data::run_import(args, &file),
        Command::Export(args) => data::run_export(args, &file),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
