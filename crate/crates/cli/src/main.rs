//! `cnvks`: kernel-aggregated CNV association scans and simulation studies.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cnvks_core::{KernelShape, PhenotypeKind, TransformKind};

/// Exit status for invalid options or configurations.
const EXIT_VALIDATION: u8 = 2;
/// Exit status for unreadable or inconsistent input data.
const EXIT_DATA: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "cnvks",
    version,
    about = "Kernel-aggregated copy-number association scans"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scan a chromosome: marker tests, kernel profile, permutation null.
    Scan(ScanArgs),
    /// Type I error check with and without a CNV that is unrelated to the phenotype.
    NullCheck(NullCheckArgs),
    /// Write one simulated dataset.
    Simulate(SimulateArgs),
    /// Power study over a grid of scenarios and methods.
    Power(PowerArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KernelArg {
    Flat,
    Epanechnikov,
}

impl From<KernelArg> for KernelShape {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Flat => KernelShape::Flat,
            KernelArg::Epanechnikov => KernelShape::Epanechnikov,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TransformArg {
    P,
    Z,
    Log,
}

impl From<TransformArg> for TransformKind {
    fn from(t: TransformArg) -> Self {
        match t {
            TransformArg::P => TransformKind::P,
            TransformArg::Z => TransformKind::Z,
            TransformArg::Log => TransformKind::Log,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PhenotypeArg {
    Continuous,
    Binary,
}

impl From<PhenotypeArg> for PhenotypeKind {
    fn from(p: PhenotypeArg) -> Self {
        match p {
            PhenotypeArg::Continuous => PhenotypeKind::Continuous,
            PhenotypeArg::Binary => PhenotypeKind::Binary,
        }
    }
}

#[derive(Debug, Args)]
#[group(id = "bandwidth", multiple = false)]
struct BandwidthArgs {
    /// Constant-marker bandwidth: the K nearest markers.
    #[arg(long, value_name = "K")]
    bandwidth_markers: Option<usize>,
    /// Constant-width bandwidth: half-width H in base pairs.
    #[arg(long, value_name = "H")]
    bandwidth_bp: Option<f64>,
}

#[derive(Debug, Args)]
struct MethodArgs {
    #[arg(long, value_enum, default_value = "flat")]
    kernel: KernelArg,
    #[arg(long, value_enum, default_value = "z")]
    transform: TransformArg,
    /// Use the direction of association (default).
    #[arg(long, overrides_with = "unsigned")]
    signed: bool,
    /// Ignore the direction of association.
    #[arg(long, overrides_with = "signed")]
    unsigned: bool,
}

impl MethodArgs {
    fn is_signed(&self) -> bool {
        !self.unsigned
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Family-wise error rate.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Number of null draws B.
    #[arg(long, value_name = "B", default_value_t = cnvks_core::significance::DEFAULT_PERMUTATIONS)]
    permutations: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads; defaults to one per CPU.
    #[arg(long, env = "CNVKS_WORKERS")]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ScanArgs {
    /// Intensity TSV: marker_id, position, one column per subject.
    #[arg(long, value_name = "FILE")]
    intensities: PathBuf,
    /// Phenotype file: one value per subject, in intensity-column order.
    #[arg(long, value_name = "FILE")]
    phenotype: PathBuf,
    #[arg(long, value_enum, default_value = "continuous")]
    phenotype_kind: PhenotypeArg,
    #[command(flatten)]
    bandwidth: BandwidthArgs,
    #[command(flatten)]
    method: MethodArgs,
    /// Enumerate all n! permutations instead of drawing B (n <= 8).
    #[arg(long)]
    exhaustive: bool,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Args)]
struct NullCheckArgs {
    #[arg(long, default_value_t = 200)]
    subjects: usize,
    #[arg(long, default_value_t = 200)]
    markers: usize,
    #[arg(long, default_value_t = 30)]
    cnv_size: usize,
    /// Signal strength of the CNV in the no-association setting.
    #[arg(long, default_value_t = 1.6)]
    snr: f64,
    #[arg(long, default_value_t = 500)]
    replicates: usize,
    #[command(flatten)]
    bandwidth: BandwidthArgs,
    #[command(flatten)]
    method: MethodArgs,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Study file with single-valued scenario keys; defaults apply otherwise.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PowerArgs {
    /// Study file of `key = value` lines.
    #[arg(
        long,
        value_name = "FILE",
        conflicts_with = "preset",
        required_unless_present = "preset"
    )]
    grid: Option<PathBuf>,
    /// Built-in study: transforms, bandwidth-mode or bandwidth-sweep.
    #[arg(long)]
    preset: Option<String>,
    /// Override the replicates per cell.
    #[arg(long)]
    replicates: Option<usize>,
    /// Override the number of null draws B.
    #[arg(long, value_name = "B")]
    permutations: Option<usize>,
    /// Override the level.
    #[arg(long)]
    alpha: Option<f64>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "CNVKS_WORKERS")]
    workers: Option<usize>,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cnvks: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
