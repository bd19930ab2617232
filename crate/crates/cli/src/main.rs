//! `cscodec`: train, run, and inspect the scalable speech codec.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cscodec::cmds::{self, TrainArgs};

#[derive(Parser)]
#[command(name = "cscodec", about = "Scalable neural speech codec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write a checkpoint.
    Train {
        /// key = value config file (arch.*, stft.*, vq.*, train.*, eval.*).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory of 16-bit mono .wav clips.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Generate N synthetic clips instead of reading a directory.
        #[arg(long, value_name = "N")]
        synth: Option<usize>,
        /// Length of each synthetic clip in seconds.
        #[arg(long, default_value_t = 0.1)]
        clip_seconds: f64,
        /// Checkpoint output path.
        #[arg(long)]
        out: PathBuf,
        /// Overrides train.seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Encode a .wav file into a bitstream.
    Encode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_name = "WAV")]
        r#in: PathBuf,
        #[arg(long, value_name = "BITS")]
        out: PathBuf,
        /// Number of quantizer streams to emit.
        #[arg(long, default_value_t = 1)]
        streams: usize,
    },
    /// Decode a bitstream back into a .wav file.
    Decode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_name = "BITS")]
        r#in: PathBuf,
        #[arg(long, value_name = "WAV")]
        out: PathBuf,
        /// Accept fingerprint mismatches and recoverable stream damage.
        #[arg(long)]
        lenient: bool,
    },
    /// Report quality, bitrate, and throughput over a clip directory.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data_dir: PathBuf,
        /// Comma-separated stream counts (default: every count).
        #[arg(long, value_delimiter = ',')]
        streams: Option<Vec<usize>>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print a checkpoint's architecture and parameter counts.
    Inspect {
        #[arg(long)]
        model: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train { config, data_dir, synth, clip_seconds, out, seed } => {
            cmds::cmd_train(TrainArgs {
                config: config.as_deref(),
                data_dir: data_dir.as_deref(),
                synth: *synth,
                clip_seconds: *clip_seconds,
                out,
                seed: *seed,
            })
        }
        Command::Encode { model, r#in, out, streams } => cmds::cmd_encode(model, r#in, out, *streams),
        Command::Decode { model, r#in, out, lenient } => cmds::cmd_decode(model, r#in, out, *lenient),
        Command::Eval { model, data_dir, streams, csv } => {
            cmds::cmd_eval(model, data_dir, streams.clone(), csv.as_deref())
        }
        Command::Inspect { model } => cmds::cmd_inspect(model),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
