//! `povmsim`: experiments on POVM simulation by postselection.
//!
//! Outcome labels on the command line and in every file are 1-based.
//!
//! Exit codes: 0 success, 1 I/O or runtime error, 2 invalid input (malformed
//! flags or files, objects failing validation), 3 statistical check failure.

mod commands;
mod record;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_STATISTICAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "povmsim", version, about = "Simulate POVMs with few-outcome measurements and postselection")]
struct Cli {
    /// Require explicit seeds for every randomized command (also enabled by POVMSIM_CI=1).
    #[arg(long, global = true)]
    ci: bool,

    /// Also write the experiment record to this file.
    #[arg(long, global = true)]
    record: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a POVM file.
    GenPovm(GenPovmArgs),
    /// Success probability of the postselection scheme for a POVM file.
    Qsucc(QsuccArgs),
    /// Best-of-k success probability across dimensions, as CSV.
    Scan(ScanArgs),
    /// Sample outcomes directly or through the scheme.
    Sample(SampleArgs),
    /// Naimark dilation of a POVM or of one sub-POVM.
    Dilate(DilateArgs),
    /// Noise report for the scheme and for a direct dilation.
    Noise(NoiseArgs),
    /// Histogram of q_succ over Haar POVMs with the concentration threshold.
    Concentration(ConcentrationArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Haar,
    Ic,
    Sic,
    Fourier,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct GenPovmArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    #[arg(long)]
    pub dim: usize,
    /// Outcome count; defaults to dim^2.
    #[arg(long)]
    pub outcomes: Option<usize>,
    /// IC fiducial parameter as `re,im`.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    /// SIC fiducial file; bundled fiducials exist for d = 2, 3.
    #[arg(long)]
    pub fiducial: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct QsuccArgs {
    #[arg(long)]
    pub povm: PathBuf,
    /// Outcome count of the sub-measurements; blocks hold at most m-1 outcomes.
    #[arg(long)]
    pub m: usize,
    /// `standard`, `random:K` or `greedy`.
    #[arg(long, default_value = "standard")]
    pub strategy: String,
    #[arg(long, default_value_t = 50)]
    pub max_passes: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the chosen partition (1-based JSON).
    #[arg(long)]
    pub partition_out: Option<PathBuf>,
    /// Write the POVM with a `scheme` section.
    #[arg(long)]
    pub scheme_out: Option<PathBuf>,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct ScanArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    /// Comma-separated dimensions; may be empty.
    #[arg(long, default_value = "")]
    pub dims: String,
    /// Random partitions per POVM.
    #[arg(long, default_value_t = 24)]
    pub partitions: usize,
    /// POVM instances per dimension (Haar only).
    #[arg(long, default_value_t = 1)]
    pub instances: usize,
    #[arg(long)]
    pub fiducial_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Direct,
    Scheme,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub povm: PathBuf,
    /// State file; defaults to the maximally mixed state.
    #[arg(long)]
    pub state: Option<PathBuf>,
    #[arg(long)]
    pub shots: u64,
    #[arg(long, value_enum, default_value = "direct")]
    pub mode: Mode,
    /// Scheme mode: sub-measurement outcome count, default dim.
    #[arg(long)]
    pub m: Option<usize>,
    /// Scheme mode: partition file instead of the standard partition.
    #[arg(long)]
    pub partition: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-outcome CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// TVD tolerance of the statistical check, default 3*sqrt(n/kept shots).
    #[arg(long)]
    pub max_tvd: Option<f64>,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct DilateArgs {
    #[arg(long)]
    pub povm: PathBuf,
    #[arg(long)]
    pub pad_to: Option<usize>,
    /// Dilate the sub-POVM of this block (comma-separated 1-based labels), padded to 2d.
    #[arg(long, value_delimiter = ',')]
    pub block: Option<Vec<usize>>,
    /// Skip the unitary completion.
    #[arg(long)]
    pub no_complete: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct NoiseArgs {
    #[arg(long)]
    pub povm: PathBuf,
    /// Fixed visibility for the scheme circuits.
    #[arg(long, conflicts_with = "r2")]
    pub eta: Option<f64>,
    /// Two-qubit gate error rate; visibilities follow from gate-count estimates.
    #[arg(long)]
    pub r2: Option<f64>,
    /// Sub-measurement outcome count, default dim+1.
    #[arg(long)]
    pub m: Option<usize>,
    /// Dilation dimension, default 2*dim.
    #[arg(long)]
    pub d_tot: Option<usize>,
    #[arg(long)]
    pub state: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV row with the report's scalar fields.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct ConcentrationArgs {
    #[arg(long)]
    pub dim: usize,
    #[arg(long)]
    pub outcomes: Option<usize>,
    /// Default dim.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ci = cli.ci || std::env::var("POVMSIM_CI").is_ok_and(|v| !v.is_empty() && v != "0");
    let ctx = commands::Context { ci, record_path: cli.record };
    let result = match &cli.command {
        Command::GenPovm(a) => commands::gen_povm(&ctx, a),
        Command::Qsucc(a) => commands::qsucc(&ctx, a),
        Command::Scan(a) => commands::scan(&ctx, a),
        Command::Sample(a) => commands::sample(&ctx, a),
        Command::Dilate(a) => commands::dilate(&ctx, a),
        Command::Noise(a) => commands::noise(&ctx, a),
        Command::Concentration(a) => commands::concentration(&ctx, a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let validation = e.chain().any(|c| {
                c.downcast_ref::<commands::UsageError>().is_some()
                    || c.downcast_ref::<povmsim_core::Error>().is_some_and(|c| c.is_validation())
            });
            ExitCode::from(if validation { EXIT_VALIDATION } else { 1 })
        }
    }
}
