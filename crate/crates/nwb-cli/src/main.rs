//! `nwb`: narrowband CSI synthesis, wideband extrapolation, and sensing from
//! the command line. Every subcommand reads the same TOML run configuration
//! (`--config`), with a handful of flags overriding individual fields.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod plots;

#[derive(Parser)]
#[command(name = "nwb", version, about = "wideband channel extrapolation toolkit")]
struct Cli {
    /// TOML run configuration; defaults apply when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// worker threads for batched work (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize CSI frames: an environment family, or a motion time series
    Simulate {
        /// output dataset (.jsonl for text, anything else binary)
        #[arg(long)]
        out: PathBuf,
        /// frames to draw from the environment family
        #[arg(long)]
        count: Option<usize>,
        /// subcarriers per frame
        #[arg(long)]
        subcarriers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Split a wideband dataset into train / eval-truth / narrowband eval-input
    MakeDataset {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        eval_truth_out: Option<PathBuf>,
        #[arg(long)]
        eval_input_out: Option<PathBuf>,
        /// training fraction in [0, 1]
        #[arg(long)]
        split: Option<f64>,
        /// subcarriers kept in the narrowband eval inputs
        #[arg(long)]
        narrow: Option<usize>,
    },
    /// Train the denoiser on a wideband dataset
    Train {
        #[arg(long)]
        data: PathBuf,
        /// checkpoint directory (resumes from the latest epoch inside)
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// directory for a loss-curve PNG
        #[arg(long)]
        plots: Option<PathBuf>,
    },
    /// Expand narrowband frames to k×-wider eCSI frames
    Extrapolate {
        #[arg(long)]
        input: PathBuf,
        /// bandwidth expansion factor
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// overwrite the regenerated central band with the measured input
        #[arg(long)]
        clamp: bool,
    },
    /// Score eCSI against wideband truth (MSE and CIR accuracy vs noise)
    Eval {
        /// narrowband inputs
        #[arg(long)]
        input: PathBuf,
        /// wideband truth, aligned record-for-record with the inputs
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// expansion factors, comma separated
        #[arg(long, value_delimiter = ',')]
        ks: Vec<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_csv: Option<PathBuf>,
        #[arg(long)]
        out_json: Option<PathBuf>,
        /// directory for median-vs-k PNGs
        #[arg(long)]
        plots: Option<PathBuf>,
        #[arg(long)]
        clamp: bool,
    },
    /// Time of flight of the earliest dominant CIR peak, per frame
    Tof {
        #[arg(long)]
        input: PathBuf,
        /// peak dominance ratio in (0, 1]
        #[arg(long)]
        ratio: Option<f64>,
        /// JSON output (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-path breathing rates from a CSI time series
    Breath {
        #[arg(long)]
        input: PathBuf,
        /// JSON output (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        /// directory for per-path spectrogram PNGs
        #[arg(long)]
        plots: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> nwb_core::Result<()> {
    if let Some(n) = cli.threads {
        // A second build_global in-process is harmless; keep the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cfg = config::RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate { out, count, subcarriers, seed } => {
            commands::simulate(&cfg, &out, count, subcarriers, seed)
        }
        Command::MakeDataset { input, train_out, eval_truth_out, eval_input_out, split, narrow } => {
            commands::make_dataset(
                &cfg,
                &input,
                &train_out,
                eval_truth_out.as_deref(),
                eval_input_out.as_deref(),
                split,
                narrow,
            )
        }
        Command::Train { data, out, steps, epochs, seed, plots } => {
            commands::train(&cfg, &data, &out, steps, epochs, seed, plots.as_deref())
        }
        Command::Extrapolate { input, k, checkpoint, seed, out, clamp } => {
            commands::extrapolate_dataset(&cfg, &input, k, &checkpoint, seed, &out, clamp)
        }
        Command::Eval { input, truth, checkpoint, ks, seed, out_csv, out_json, plots, clamp } => {
            commands::eval(
                &cfg,
                &input,
                &truth,
                &checkpoint,
                &ks,
                seed,
                out_csv.as_deref(),
                out_json.as_deref(),
                plots.as_deref(),
                clamp,
            )
        }
        Command::Tof { input, ratio, out } => commands::tof(&cfg, &input, ratio, out.as_deref()),
        Command::Breath { input, out, plots } => {
            commands::breath(&cfg, &input, out.as_deref(), plots.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let payload = serde_json::json!({
                "error": { "kind": e.kind(), "message": e.to_string() }
            });
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}
