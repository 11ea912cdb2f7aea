use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;

#[derive(Debug)]
pub enum CliError {
    Lib(fabisearch::Error),
    Config(String),
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Config(m) => write!(f, "config: {m}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<fabisearch::Error> for CliError {
    fn from(e: fabisearch::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Lib(e.into())
    }
}

#[derive(Parser, Debug)]
#[command(name = "fabisearch", version, about = "Change point detection and network estimation with NMF")]
pub struct Cli {
    /// TOML file with default settings.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads. Results do not depend on it.
    #[arg(long, global = true, env = "FABISEARCH_THREADS")]
    pub threads: Option<usize>,

    /// How results are printed on stdout.
    #[arg(long, global = true, value_enum)]
    pub output_format: Option<OutputFormat>,

    /// Only print errors on stderr.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Table,
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Choose the factorization rank.
    OptRank(OptRankArgs),
    /// Detect change points and test them.
    DetectCps(DetectArgs),
    /// Estimate a network for every stationary segment.
    EstNet(EstNetArgs),
    /// Draw a simulated dataset with known change points.
    Simulate(SimulateArgs),
    /// Join an adjacency matrix with an atlas into a viewer JSON file.
    ExportViewer(ExportArgs),
}

#[derive(Args, Debug)]
pub struct InputArgs {
    /// Time series table: rows are time points, columns variables.
    #[arg(short, long)]
    pub input: PathBuf,
    /// Table format; guessed from the extension when absent.
    #[arg(long)]
    pub format: Option<String>,
    /// The first row holds column labels.
    #[arg(long)]
    pub header: bool,
}

#[derive(Args, Debug, Default)]
pub struct NmfArgs {
    /// Random restarts per fit.
    #[arg(long)]
    pub nruns: Option<usize>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Relative loss change that stops the updates.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// NMF algorithm (`brunet`).
    #[arg(long)]
    pub algtype: Option<String>,
}

#[derive(Args, Debug)]
pub struct OptRankArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub nmf: NmfArgs,
    /// Write the selection with its per-rank diagnostics as JSON.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub nmf: NmfArgs,
    /// Minimum distance between change points and to segment ends.
    #[arg(long)]
    pub mindist: Option<usize>,
    /// Repetitions for the refit and permutation distributions.
    #[arg(long)]
    pub nreps: Option<usize>,
    /// Report significance at this level instead of p-values.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Factorization rank; selected automatically when absent.
    #[arg(long)]
    pub rank: Option<usize>,
    /// t-test, wilcox or ks.
    #[arg(long)]
    pub testtype: Option<String>,
    /// Stop the recursion where splitting does not lower the loss.
    #[arg(long)]
    pub require_loss_decrease: bool,
    /// Write the report as JSON.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EstNetArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub nmf: NmfArgs,
    /// Cluster count (`4`), threshold (`0.5`) or list of thresholds (`0.1,0.2`).
    #[arg(long)]
    pub lambda: Option<String>,
    /// Factorization rank; selected per segment when absent.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Change points, comma separated: each closes the segment ending there.
    #[arg(long, value_delimiter = ',')]
    pub changepoints: Vec<usize>,
    /// Directory for the adjacency files and manifest.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Adjacency file format: csv or json.
    #[arg(long)]
    pub matrix_format: Option<String>,
    /// Also write each consensus matrix.
    #[arg(long)]
    pub consensus: bool,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long = "t")]
    pub t: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub changepoints: Vec<usize>,
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub within_corr: Option<f64>,
    #[arg(long)]
    pub between_corr: Option<f64>,
    /// Keep the same cluster labels across change points.
    #[arg(long)]
    pub no_reshuffle: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub target_mean: Option<f64>,
    #[arg(long)]
    pub min_sd: Option<f64>,
    /// Output data table.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Ground truth JSON; defaults to `<output>.truth.json`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Write a header row of variable names.
    #[arg(long)]
    pub header: bool,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    /// 0/1 adjacency matrix without header.
    #[arg(long)]
    pub adjacency: PathBuf,
    /// Atlas CSV with columns community,x,y,z.
    #[arg(long)]
    pub atlas: PathBuf,
    /// Keep only these communities (comma separated).
    #[arg(long, value_delimiter = ',', conflicts_with = "nodes")]
    pub communities: Vec<String>,
    /// Keep only these 1-based node ids, e.g. `1-30` or `1,5,9`.
    #[arg(long)]
    pub nodes: Option<String>,
    /// Community colors in order, e.g. `#ff0000,#00ff00`.
    #[arg(long, value_delimiter = ',')]
    pub colors: Vec<String>,
    /// Dataset name stored in the metadata.
    #[arg(long)]
    pub source: Option<String>,
    /// Segment index stored in the metadata.
    #[arg(long)]
    pub segment: Option<usize>,
    /// Threshold the matrix was built with, for the metadata.
    #[arg(long, conflicts_with = "k")]
    pub lambda: Option<f64>,
    /// Cluster count the matrix was built with, for the metadata.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(short, long)]
    pub output: PathBuf,
}

fn init_logging(quiet: bool) {
    let level = if quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format(|buf, record| {
            if record.level() <= log::Level::Warn {
                writeln!(buf, "{}: {}", record.level().as_str().to_lowercase(), record.args())
            } else {
                writeln!(buf, "[1] \"{}\"", record.args())
            }
        })
        .init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.quiet);
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
