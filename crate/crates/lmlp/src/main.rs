use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lmlp::cli;
use lmlp::error::ToolError;

/// Voxel-wise tomography toolkit: simulate tilt series, reconstruct with
/// FBP or a trained patch MLP, and evaluate with FSC.
#[derive(Parser)]
#[command(name = "lmlp", version, about)]
struct Cli {
    /// Cap the worker thread count (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a phantom and its noisy tilt series.
    Simulate {
        /// Run configuration JSON (defaults used when omitted).
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Tilt range as start:stop:count, both ends included.
        #[arg(long, default_value = "-60:60:41", allow_hyphen_values = true)]
        angles: String,
        /// Noise spec: none | gaussian[:sigma] | poisson[:dose].
        #[arg(long)]
        noise: Option<String>,
        /// Seed override for phantom and noise.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for phantom.mrc, tilts.mrc, tilts.tlt.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Filtered back-projection baseline reconstruction.
    Fbp {
        /// Projection stack (MRC).
        #[arg(long)]
        tilts: PathBuf,
        /// Tilt-angle sidecar (.tlt).
        #[arg(long)]
        angles: PathBuf,
        /// ramlak | hann
        #[arg(long, default_value = "ramlak")]
        filter: String,
        /// Output volume (MRC).
        #[arg(long)]
        out: PathBuf,
        /// Optional ground-truth volume; prints PSNR when given.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Train the voxel-wise network from a manifest of pairs.
    Train {
        /// Manifest CSV with header reference,tilts,angles.
        #[arg(long)]
        pairs: PathBuf,
        /// Run configuration JSON (defaults used when omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output checkpoint (.lmlp); the log lands next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Voxel-wise reconstruction with a trained checkpoint.
    Reconstruct {
        /// Projection stack (MRC).
        #[arg(long)]
        tilts: PathBuf,
        /// Tilt-angle sidecar (.tlt).
        #[arg(long)]
        angles: PathBuf,
        /// Trained checkpoint (.lmlp).
        #[arg(long)]
        model: PathBuf,
        /// Voxels per work chunk; trades memory for scheduling overhead.
        #[arg(long, default_value_t = 4096)]
        chunk: usize,
        /// Output volume (MRC).
        #[arg(long)]
        out: PathBuf,
    },
    /// Fourier shell correlation between two volumes.
    Fsc {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Output CSV (frequency,fsc,shell_count).
        #[arg(long)]
        out: PathBuf,
    },
    /// Central orthoslice PNGs of a volume.
    Slice {
        #[arg(long)]
        volume: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn run(cmd: Command) -> Result<(), ToolError> {
    match cmd {
        Command::Simulate {
            spec,
            angles,
            noise,
            seed,
            out_dir,
        } => cli::simulate(&cli::SimulateArgs {
            spec,
            angles,
            noise,
            seed,
            out_dir,
        }),
        Command::Fbp {
            tilts,
            angles,
            filter,
            out,
            reference,
        } => cli::fbp(&cli::FbpArgs {
            tilts,
            angles,
            filter,
            out,
            reference,
        }),
        Command::Train { pairs, config, out } => {
            cli::train_cmd(&cli::TrainArgs { pairs, config, out })
        }
        Command::Reconstruct {
            tilts,
            angles,
            model,
            chunk,
            out,
        } => cli::reconstruct_cmd(&cli::ReconstructArgs {
            tilts,
            angles,
            model,
            chunk,
            out,
        }),
        Command::Fsc { a, b, out } => cli::fsc_cmd(&cli::FscArgs { a, b, out }),
        Command::Slice { volume, out_dir } => {
            cli::slice_cmd(&cli::SliceArgs { volume, out_dir })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("usage error: --threads must be >= 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("failed to configure thread pool: {e}");
            return ExitCode::from(4);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lmlp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
