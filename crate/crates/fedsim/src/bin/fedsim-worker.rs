use std::process::ExitCode;

use clap::Parser;
use fedsim::cli::{parse_eta, GradientModeArg};
use fedsim::runtime::{ClientOptions, LocalTraining};
use fedsim::worker::run_worker;
use fedsim_core::LearningRate;

/// Protocol worker: trains assigned models on locally generated data.
#[derive(Debug, Parser)]
#[command(name = "fedsim-worker", version)]
struct Args {
    /// Server address, host:port.
    addr: String,
    client_id: u32,
    /// The client's own stream seed.
    seed: u64,
    #[arg(long, default_value_t = 250, value_parser = clap::value_parser!(u32).range(1..))]
    samples: u32,
    #[arg(long, value_enum, default_value_t = GradientModeArg::Paper)]
    gradient_mode: GradientModeArg,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    local_epochs: u32,
    #[arg(long)]
    full_batch_step: bool,
    #[arg(long, default_value = "1.0", value_parser = parse_eta)]
    eta: LearningRate,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let options = ClientOptions {
        samples_per_round: args.samples,
        gradient_mode: args.gradient_mode.into(),
        local_training: if args.full_batch_step {
            LocalTraining::FullBatchStep
        } else {
            LocalTraining::Sequential {
                epochs: args.local_epochs,
            }
        },
        eta: args.eta,
    };
    match run_worker(args.addr.as_str(), args.client_id, args.seed, options) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fedsim-worker {}: {e}", args.client_id);
            ExitCode::FAILURE
        }
    }
}
