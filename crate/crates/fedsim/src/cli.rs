//! Command-line parsing for the experiment harness.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Duration;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, ValueEnum};
use fedsim_core::{GradientMode, InitialWeights, LearningRate};

use crate::runtime::{
    ClientOptions, DistributedOptions, ExperimentConfig, LocalTraining, Mode, StopCondition,
    DEFAULT_HANDSHAKE_TIMEOUT,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Concurrent,
    Distributed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GradientModeArg {
    Classic,
    Paper,
}

impl From<GradientModeArg> for GradientMode {
    fn from(m: GradientModeArg) -> Self {
        match m {
            GradientModeArg::Classic => GradientMode::Classic,
            GradientModeArg::Paper => GradientMode::PaperFaithful,
        }
    }
}

pub fn parse_eta(s: &str) -> Result<LearningRate, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    LearningRate::new(v).map_err(|e| e.to_string())
}

/// Runs a federated SGD experiment and writes per-round metrics as CSV.
#[derive(Debug, Parser)]
#[command(name = "fedsim", version)]
pub struct Args {
    /// Host clients as in-process threads or as TCP workers.
    #[arg(long, value_enum, default_value_t = ModeArg::Concurrent)]
    pub mode: ModeArg,
    /// Number of clients.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    pub clients: u32,
    /// Clients selected per round (default: all).
    #[arg(long)]
    pub subset: Option<u32>,
    /// Fresh samples each client generates per round.
    #[arg(long, default_value_t = 250, value_parser = clap::value_parser!(u32).range(1..))]
    pub samples: u32,
    /// Learning rate of the full-batch local step.
    #[arg(long, default_value = "1.0", value_parser = parse_eta)]
    pub eta: LearningRate,
    #[arg(long, value_enum, default_value_t = GradientModeArg::Paper)]
    pub gradient_mode: GradientModeArg,
    /// Local passes over the round's data.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub local_epochs: u32,
    /// Clients take one full-batch gradient step instead of sequential passes.
    #[arg(long)]
    pub full_batch_step: bool,
    /// Stop after this many rounds.
    #[arg(long, conflicts_with = "duration")]
    pub rounds: Option<u32>,
    /// Stop after this many seconds (default 500).
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Draw initial weights from this seed instead of the fixed set.
    #[arg(long)]
    pub init_seed: Option<u64>,
    /// Address to listen on in distributed mode.
    #[arg(long, required_if_eq("mode", "distributed"))]
    pub listen: Option<String>,
    /// Worker spawn template, e.g. "fedsim-worker {addr} {id} {seed} {client_flags}".
    #[arg(long, requires = "listen")]
    pub worker_cmd: Option<String>,
    /// Seconds to wait for all workers to complete the handshake.
    #[arg(long, default_value_t = DEFAULT_HANDSHAKE_TIMEOUT.as_secs_f64())]
    pub handshake_timeout: f64,
    /// Metrics CSV path (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the run's evaluation batch as `x,y,t1,t2` CSV.
    #[arg(long)]
    pub dump_eval: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CliInvocation {
    pub config: ExperimentConfig,
    pub out: Option<PathBuf>,
    pub dump_eval: Option<PathBuf>,
}

fn usage(kind: ErrorKind, msg: impl std::fmt::Display) -> clap::Error {
    Args::command().error(kind, msg)
}

fn seconds(v: f64, what: &str) -> Result<Duration, clap::Error> {
    Duration::try_from_secs_f64(v)
        .map_err(|_| usage(ErrorKind::ValueValidation, format!("invalid {what} {v}")))
}

impl Args {
    pub fn into_invocation(self) -> Result<CliInvocation, clap::Error> {
        let subset = self.subset.unwrap_or(self.clients);
        if subset == 0 || subset > self.clients {
            return Err(usage(
                ErrorKind::ValueValidation,
                format!("--subset must be within 1..={}", self.clients),
            ));
        }
        let stop = match (self.rounds, self.duration) {
            (Some(r), None) => StopCondition::Rounds(r),
            (None, Some(d)) => StopCondition::Duration(seconds(d, "--duration")?),
            (None, None) => StopCondition::Duration(Duration::from_secs(500)),
            (Some(_), Some(_)) => {
                return Err(usage(
                    ErrorKind::ArgumentConflict,
                    "--rounds and --duration are mutually exclusive",
                ))
            }
        };
        let mode = match self.mode {
            ModeArg::Concurrent => Mode::Concurrent,
            ModeArg::Distributed => Mode::Distributed(DistributedOptions {
                listen: self.listen.clone().ok_or_else(|| {
                    usage(
                        ErrorKind::MissingRequiredArgument,
                        "--mode distributed requires --listen",
                    )
                })?,
                worker_cmd: self.worker_cmd.clone(),
                handshake_timeout: seconds(self.handshake_timeout, "--handshake-timeout")?,
            }),
        };
        let local_training = if self.full_batch_step {
            LocalTraining::FullBatchStep
        } else {
            LocalTraining::Sequential {
                epochs: self.local_epochs,
            }
        };
        let config = ExperimentConfig {
            n_clients: self.clients,
            subset_size: subset,
            client: ClientOptions {
                samples_per_round: self.samples,
                gradient_mode: self.gradient_mode.into(),
                local_training,
                eta: self.eta,
            },
            stop,
            seed: self.seed,
            init: self
                .init_seed
                .map_or(InitialWeights::Fixed, InitialWeights::Seeded),
            mode,
        };
        Ok(CliInvocation {
            config,
            out: self.out,
            dump_eval: self.dump_eval,
        })
    }
}

pub fn parse_args<I, T>(argv: I) -> Result<CliInvocation, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    Args::try_parse_from(argv)?.into_invocation()
}
