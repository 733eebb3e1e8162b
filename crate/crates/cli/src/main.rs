//! `structdiv` command-line interface.
//!
//! Exit codes: 0 success, 1 input or usage error, 2 numerical failure. Errors
//! are written to standard error as JSON.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub const THREADS_ENV: &str = "STRUCTDIV_THREADS";

#[derive(Debug, Parser)]
#[command(name = "structdiv", version, about = "Structure-aware entropies, divergences and clustering")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GlobalOpts {
    /// Random seed; drawn from the OS and recorded when omitted.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write the result here instead of standard output. Reports written to
    /// a file embed the run manifest.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Override the output format.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads; 1 forces serial execution.
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct StructureOpts {
    /// Order parameter.
    #[arg(long)]
    pub alpha: f64,
    /// Similarity matrix CSV, or `identity`.
    #[arg(long)]
    pub sim: String,
    /// Floor distributions to the interior with this epsilon first.
    #[arg(long)]
    pub floor: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Entropy of each distribution in a CSV file.
    Entropy {
        #[command(flatten)]
        structure: StructureOpts,
        #[arg(long)]
        dist: PathBuf,
    },
    /// Divergence d(p||q), row by row (a single-row file is broadcast).
    Divergence {
        #[command(flatten)]
        structure: StructureOpts,
        #[arg(long)]
        p: PathBuf,
        #[arg(long)]
        q: PathBuf,
    },
    /// All-pairs Jensen-Bregman divergence matrix.
    JbdMatrix {
        #[command(flatten)]
        structure: StructureOpts,
        #[arg(long)]
        dist: PathBuf,
        #[arg(long, value_enum, default_value = "fast")]
        method: JbdMethod,
    },
    /// Bregman k-means clustering.
    Cluster {
        #[command(flatten)]
        structure: StructureOpts,
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 100)]
        restarts: usize,
        #[arg(long, default_value_t = 500)]
        max_iters: usize,
        /// Column of the distribution file holding member weights.
        #[arg(long)]
        weights_column: Option<String>,
        /// Where to write the centroid CSV (defaults next to --out).
        #[arg(long)]
        centroids: Option<PathBuf>,
    },
    /// Exact Wasserstein-1 distances between distribution rows.
    Wasserstein {
        /// Ground distance matrix CSV.
        #[arg(long)]
        metric: PathBuf,
        #[arg(long)]
        dist: PathBuf,
    },
    /// Similarity matrix from a distance matrix.
    SimFromDist {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "exp")]
        method: SimMethod,
        /// Scale for `exp(-tau d)`.
        #[arg(long, conflicts_with = "median_similarity")]
        tau: Option<f64>,
        /// Pick tau so the median off-diagonal similarity equals this.
        #[arg(long)]
        median_similarity: Option<f64>,
    },
    /// Similarity matrix from a hierarchy of codes.
    SimFromHierarchy {
        /// CSV of element, code1, ..., codeL.
        #[arg(long)]
        paths: PathBuf,
        /// JSON map from level ("0".."L") to similarity.
        #[arg(long)]
        levels: PathBuf,
    },
    /// Nearest positive definite similarity matrix.
    NearestPd {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        delta: f64,
        #[arg(long, default_value_t = 1.0 - 1e-9)]
        cap: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iters: usize,
    },
    /// Reproduction experiments.
    #[command(subcommand)]
    Exp(ExpCommand),
}

#[derive(Debug, Subcommand)]
pub enum ExpCommand {
    /// Planted-partition recovery with and without structure.
    Planted {
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16")]
        m_values: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        runs: usize,
        #[arg(long, default_value_t = 100)]
        restarts: usize,
        /// Layout JSON (defaults to the bundled layout).
        #[arg(long)]
        layout: Option<PathBuf>,
    },
    /// All-pairs runtime against exact optimal transport (single-threaded).
    Runtime {
        #[arg(long, value_delimiter = ',', default_value = "10,25,50,100,200")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        #[arg(long, value_enum, default_value = "flat-dirichlet")]
        sampler: SamplerArg,
    },
    /// β-diversity of the Rutor succession stages against a null model.
    BetaDiv {
        /// Directory with abundance.csv, stages.csv and traits.csv.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1000)]
        n_null: usize,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JbdMethod {
    Fast,
    Naive,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMethod {
    Exp,
    Linear,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerArg {
    FlatDirichlet,
    NormalizedUniform,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
    exit_code: u8,
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    let body = serde_json::json!({ "error": ErrorBody { kind, message, exit_code: code } });
    eprintln!("{body}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{}", e.render());
            return fail("usage", e.kind().to_string(), 1);
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is_numerical() => fail("numerical", e.to_string(), 2),
        Err(e) => fail("input", e.to_string(), 1),
    }
}
