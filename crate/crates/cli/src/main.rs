//! `sritm`: decomposition dumps, inference, training, evaluation, format
//! conversion, dataset synthesis and self-verification.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use error::{CliError, CliResult, EXIT_USAGE};

#[derive(Parser, Debug)]
#[command(name = "sritm", version, about = "Joint super-resolution and inverse tone-mapping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split a frame into guided-filter base and detail layers.
    Decompose(DecomposeArgs),
    /// Upscale an SDR frame to an HDR frame.
    Infer(InferArgs),
    /// Train a network on dataset shards or a built-in preset.
    Train(TrainArgs),
    /// Score predicted frames against ground truth.
    Eval(EvalArgs),
    /// Convert a frame between SDR and HDR display formats.
    Convert(ConvertArgs),
    /// Run a built-in verification suite.
    Selfcheck(SelfcheckArgs),
    /// Extract training pairs into a shard file.
    MakeDataset(MakeDatasetArgs),
}

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub radius: usize,
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    #[arg(long)]
    pub out_base: PathBuf,
    #[arg(long)]
    pub out_detail: PathBuf,
    /// Check that base times detail reproduces the input.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Args, Debug)]
pub struct InferArgs {
    #[arg(long)]
    pub weights: PathBuf,
    /// Network config file (`key = value` lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Write one normalized image per modulated block into this directory.
    #[arg(long, value_name = "DIR")]
    pub dump_modulation_maps: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Desk,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// Shard files, or directories searched for `*.srds`.
    #[arg(long, num_args = 1..)]
    pub shards: Vec<PathBuf>,
    #[arg(long)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub out: PathBuf,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Stop once this many iterations are complete.
    #[arg(long)]
    pub until: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Comma-separated subset of psnr, mpsnr, ssim, msssim.
    #[arg(long, default_value = "psnr,mpsnr,ssim,msssim")]
    pub metrics: String,
    /// Machine-readable `key=value` report.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Allow MS-SSIM on frames too small for all five scales.
    #[arg(long)]
    pub permissive_ms_ssim: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Pq2020,
    Gamma709,
}

#[derive(Args, Debug)]
pub struct ConvertArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub to: Target,
    #[arg(long, default_value_t = 1000.0)]
    pub peak_nits: f64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Gradcheck,
    Paramcount,
    Oracles,
}

#[derive(Args, Debug)]
pub struct SelfcheckArgs {
    #[arg(long)]
    pub suite: SuiteArg,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true).args(["synthetic", "frames"])))]
pub struct MakeDatasetArgs {
    /// Number of synthetic scenes.
    #[arg(long)]
    pub synthetic: Option<usize>,
    /// Directory holding `hdr/` and `sdr/` frame folders.
    #[arg(long)]
    pub frames: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub sf: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 160)]
    pub patch_size: usize,
    /// Edge length of each synthetic scene.
    #[arg(long, default_value_t = 320)]
    pub scene_size: usize,
    #[arg(long)]
    pub out: PathBuf,
}

fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("SRITM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("SRITM_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("SRITM_THREADS: {e}")))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Decompose(a) => commands::decompose::run(&a),
        Command::Infer(a) => commands::infer::run(&a),
        Command::Train(a) => commands::train::run(&a),
        Command::Eval(a) => commands::eval::run(&a),
        Command::Convert(a) => commands::convert::run(&a),
        Command::Selfcheck(a) => commands::selfcheck::run(&a),
        Command::MakeDataset(a) => commands::dataset::run(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
