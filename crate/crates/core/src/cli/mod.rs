//! The `evidence-sdd` command line.
//!
//! Every subcommand resolves a [`RunConfig`] (defaults, then `--config`,
//! then flags), writes its artifacts under one output directory and
//! finishes with `config.resolved.toml` and `run_manifest.json` there.
//! Exit codes: 0 success, 1 usage error, 2 data or validation error.

mod commands;
mod config;
mod plot;
mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand};

pub use config::RunConfig;
pub use plot::{ablation_svg, parse_ablation_csv, AccRow, ReportSummary};
pub use run::{comment_header, FileDigest, RunRecorder};

use crate::error::Error;
use crate::features::TfKind;
use crate::model::{HeadSelect, Setting};
use crate::render::{Colormap, ImageFormat, Split};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "EVIDENCE_SDD_OUT";

#[derive(Debug, Parser)]
#[command(name = "evidence-sdd", version, about = "Time-frequency evidence for speech deepfake detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// TOML config file (`.json` is read as JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; defaults to `$EVIDENCE_SDD_OUT/<subcommand>`, else `runs/<subcommand>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the model, training and synthesis sections.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Args, Default)]
struct ImageFlags {
    /// Representation: mel, stft, lfcc, mfcc, cqcc or cqt.
    #[arg(long)]
    rep: Option<TfKind>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    /// viridis or gray.
    #[arg(long)]
    colormap: Option<Colormap>,
    /// ppm or png.
    #[arg(long)]
    format: Option<ImageFormat>,
}

#[derive(Debug, Clone, Args, Default)]
struct TrainFlags {
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Stop once training accuracy (percent) reaches this value.
    #[arg(long)]
    target_acc: Option<f64>,
    /// Measure training accuracy every N steps.
    #[arg(long)]
    eval_every: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute a time-frequency representation of WAV files.
    Featurize {
        #[command(flatten)]
        common: Common,
        /// Input WAV files.
        #[arg(long = "in", num_args = 1..)]
        inputs: Vec<PathBuf>,
        /// Featurize every audio file listed in a manifest instead.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Defaults to the config's render representation.
        #[arg(long)]
        rep: Option<TfKind>,
        /// Worker threads; output does not depend on it.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Write CSV instead of the binary `.tfm` format.
        #[arg(long)]
        csv: bool,
    },
    /// Render evidence images from `.tfm` or WAV files.
    Render {
        #[command(flatten)]
        common: Common,
        #[arg(long = "in", num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        image: ImageFlags,
    },
    /// Turn an ASVspoof-style protocol into a manifest with rendered evidence.
    BuildManifest {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        protocol: PathBuf,
        #[arg(long)]
        audio_root: PathBuf,
        #[command(flatten)]
        image: ImageFlags,
    },
    /// Generate the two-domain synthetic corpus.
    SynthData {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_train: Option<usize>,
        #[arg(long)]
        n_dev: Option<usize>,
        #[arg(long)]
        n_eval: Option<usize>,
        #[arg(long)]
        notch_depth_db: Option<f64>,
        #[command(flatten)]
        image: ImageFlags,
    },
    /// Train one input setting on the manifest's train split.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        /// audio_only, acoustic_only or fused.
        #[arg(long)]
        setting: Option<Setting>,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Score a checkpoint on every non-train split of a manifest.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        setting: Option<Setting>,
        /// Only this split (train, dev or eval).
        #[arg(long)]
        split: Option<Split>,
    },
    /// Train all three input settings and compare them in and out of domain.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Export attention maps and role region matrices for one sample.
    AttnDump {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Row of the manifest to use.
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long)]
        setting: Option<Setting>,
        #[arg(long, default_value_t = 0)]
        layer: usize,
        /// Head index or `mean`.
        #[arg(long, default_value = "mean")]
        head: HeadSelect,
    },
    /// Draw an ablation report as an SVG bar chart.
    Plot {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        report: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Featurize { .. } => "featurize",
            Command::Render { .. } => "render",
            Command::BuildManifest { .. } => "build-manifest",
            Command::SynthData { .. } => "synth-data",
            Command::Train { .. } => "train",
            Command::Eval { .. } => "eval",
            Command::Ablate { .. } => "ablate",
            Command::AttnDump { .. } => "attn-dump",
            Command::Plot { .. } => "plot",
        }
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code. Messages go to stderr.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match commands::run(cli.command, argv) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n\n{}", Cli::command().render_usage());
            EXIT_USAGE
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}
