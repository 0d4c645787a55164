//! The federated round engine.
//!
//! A single server activity owns the global model. Each round it selects a
//! subset of clients, sends every selected client an [`Assignment`], blocks
//! until exactly one [`Update`] per selected client has arrived, and replaces
//! the model with the sample-weighted mean of the updates. Clients own their
//! random streams and local data; nothing is shared between activities, and
//! all communication goes through a [`Transport`].
//!
//! Updates are aggregated in ascending client-id order whatever order they
//! arrive in, so in-process and TCP runs produce identical bits.

mod concurrent;
mod distributed;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use fedsim_core::ann::{self, train_pass};
use fedsim_core::datagen::{
    client_seed, derive_seed, gen_batch, initial_weights, STREAM_EVALUATION, STREAM_SELECTION,
};
use fedsim_core::fedsgd::{aggregate, local_gradient_step, select_subset};
use fedsim_core::{
    Assignment, ClientUpdate, DataRng, ErrorReason, FedError, GradientMode, InitialWeights,
    LearningRate, ModelWeights, Partition, Update,
};

pub use concurrent::ChannelTransport;
pub use distributed::{spawn_workers, DistributedServer, TcpTransport, WorkerProcesses};

use crate::wire::WireError;

pub const DEFAULT_HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(10);
pub const EVALUATION_SAMPLES: usize = 1000;

#[derive(Debug, thiserror::Error)]
pub enum RuntimeError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Fed(#[from] FedError),
    #[error("client {client}: {source}")]
    Transport { client: u32, source: WireError },
    #[error("client {client} rejected the run: {reason:?}")]
    Rejected { client: u32, reason: ErrorReason },
    #[error("protocol violation by client {client}: {detail}")]
    Protocol { client: u32, detail: String },
    #[error("only {connected} of {expected} workers completed the handshake before the timeout")]
    HandshakeTimeout { connected: usize, expected: usize },
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        source: std::io::Error,
    },
    #[error("cannot spawn worker {client}: {source}")]
    Spawn { client: u32, source: std::io::Error },
    #[error("all client activities have stopped")]
    ClientsGone,
    #[error("worker processes for clients {clients:?} exited unsuccessfully")]
    WorkersFailed { clients: Vec<u32> },
    #[error("metrics sink failed: {0}")]
    Sink(std::io::Error),
}

/// What a client does with an assignment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocalTraining {
    /// `epochs` sequential per-sample passes over freshly generated data.
    Sequential { epochs: u32 },
    /// One full-batch gradient step at the assigned weights, scaled by η.
    FullBatchStep,
}

impl Default for LocalTraining {
    fn default() -> Self {
        LocalTraining::Sequential { epochs: 1 }
    }
}

/// Client-side parameters. Out-of-process workers must be started with the
/// same values as the server's configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClientOptions {
    pub samples_per_round: u32,
    pub gradient_mode: GradientMode,
    pub local_training: LocalTraining,
    pub eta: LearningRate,
}

impl Default for ClientOptions {
    fn default() -> Self {
        ClientOptions {
            samples_per_round: 250,
            gradient_mode: GradientMode::PaperFaithful,
            local_training: LocalTraining::default(),
            eta: LearningRate::ONE,
        }
    }
}

impl ClientOptions {
    /// Training passes one assignment costs.
    pub fn passes_per_assignment(&self) -> u64 {
        match self.local_training {
            LocalTraining::Sequential { epochs } => u64::from(epochs),
            LocalTraining::FullBatchStep => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopCondition {
    Rounds(u32),
    Duration(Duration),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistributedOptions {
    pub listen: String,
    /// Template for spawning one worker process per client; see
    /// [`spawn_workers`]. Without it the server waits for externally
    /// started workers.
    pub worker_cmd: Option<String>,
    pub handshake_timeout: Duration,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Concurrent,
    Distributed(DistributedOptions),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub n_clients: u32,
    pub subset_size: u32,
    pub client: ClientOptions,
    pub stop: StopCondition,
    pub seed: u64,
    pub init: InitialWeights,
    pub mode: Mode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_clients: 10,
            subset_size: 10,
            client: ClientOptions::default(),
            stop: StopCondition::Duration(Duration::from_secs(500)),
            seed: 42,
            init: InitialWeights::Fixed,
            mode: Mode::Concurrent,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), RuntimeError> {
        if self.n_clients == 0 {
            return Err(RuntimeError::Config(
                "at least one client is required".into(),
            ));
        }
        if self.subset_size == 0 || self.subset_size > self.n_clients {
            return Err(RuntimeError::Config(format!(
                "subset size {} must be within 1..={}",
                self.subset_size, self.n_clients
            )));
        }
        if self.client.samples_per_round == 0 {
            return Err(RuntimeError::Config(
                "samples per round must be at least 1".into(),
            ));
        }
        if let LocalTraining::Sequential { epochs: 0 } = self.client.local_training {
            return Err(RuntimeError::Config(
                "local epochs must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn client_ids(&self) -> Vec<u32> {
        (0..self.n_clients).collect()
    }
}

/// Measurements taken after each round.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundMetrics {
    pub round: u32,
    pub elapsed_s: f64,
    /// Cumulative local training passes over all clients.
    pub epochs: u64,
    /// Global-model MSE on the run's fixed evaluation batch.
    pub mse: f64,
}

/// Client activity state: identity, private random stream and options.
pub struct ClientState {
    pub id: u32,
    rng: DataRng,
    options: ClientOptions,
}

impl ClientState {
    /// `seed` is the client's own stream seed, see
    /// [`fedsim_core::datagen::client_seed`].
    pub fn new(id: u32, seed: u64, options: ClientOptions) -> Self {
        ClientState {
            id,
            rng: fedsim_core::DataSeed(seed).rng(),
            options,
        }
    }

    pub fn for_run(id: u32, run_seed: u64, options: ClientOptions) -> Self {
        Self::new(id, client_seed(run_seed, id).0, options)
    }

    /// Trains the assigned model on fresh local data.
    pub fn step(&mut self, assignment: &Assignment) -> Update {
        let samples = gen_batch(&mut self.rng, self.options.samples_per_round as usize);
        let model = match self.options.local_training {
            LocalTraining::Sequential { epochs } => (0..epochs).fold(assignment.model, |w, _| {
                train_pass(&samples, &w, self.options.gradient_mode)
            }),
            LocalTraining::FullBatchStep => {
                let partition = Partition::new(samples).expect("samples_per_round >= 1");
                local_gradient_step(&assignment.model, &partition, self.options.eta)
            }
        };
        Update {
            round: assignment.round,
            client_id: self.id,
            model,
            sample_count: self.options.samples_per_round,
        }
    }
}

/// Server side of the message exchange.
pub trait Transport {
    fn dispatch(&mut self, client: u32, assignment: &Assignment) -> Result<(), RuntimeError>;
    /// Blocks until the next update arrives from any client.
    fn next_update(&mut self) -> Result<Update, RuntimeError>;
    fn shutdown(&mut self) -> Result<(), RuntimeError>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundOutcome {
    pub model: ModelWeights,
    /// Selected clients in ascending id order.
    pub participants: Vec<u32>,
}

/// One round: select, dispatch, collect exactly `k` updates, aggregate.
pub fn server_round<T: Transport + ?Sized>(
    transport: &mut T,
    model: &ModelWeights,
    round: u32,
    clients: &[u32],
    k: usize,
    rng: &mut DataRng,
) -> Result<RoundOutcome, RuntimeError> {
    let subset = select_subset(clients, k, rng)?;
    let assignment = Assignment {
        round,
        model: *model,
    };
    for &client in &subset {
        transport.dispatch(client, &assignment)?;
    }

    let mut pending: BTreeMap<u32, Option<ClientUpdate>> =
        subset.iter().map(|&c| (c, None)).collect();
    for _ in 0..subset.len() {
        let update = transport.next_update()?;
        let client = update.client_id;
        if update.round != round {
            return Err(RuntimeError::Protocol {
                client,
                detail: format!("update for round {} during round {round}", update.round),
            });
        }
        if update.sample_count == 0 {
            return Err(RuntimeError::Protocol {
                client,
                detail: "zero sample count".into(),
            });
        }
        match pending.get_mut(&client) {
            Some(slot @ None) => {
                *slot = Some(ClientUpdate {
                    weights: update.model,
                    sample_count: update.sample_count,
                })
            }
            Some(Some(_)) => {
                return Err(RuntimeError::Protocol {
                    client,
                    detail: "duplicate update".into(),
                })
            }
            None => {
                return Err(RuntimeError::Protocol {
                    client,
                    detail: "update from a client that was not assigned".into(),
                })
            }
        }
    }

    let participants: Vec<u32> = pending.keys().copied().collect();
    let updates: Vec<ClientUpdate> = pending.into_values().flatten().collect();
    let model = aggregate(&updates)?;
    Ok(RoundOutcome {
        model,
        participants,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub metrics: Vec<RoundMetrics>,
    pub model: ModelWeights,
}

/// Evaluation batch of a run: fixed for the whole run, from its own stream.
pub fn evaluation_batch(run_seed: u64) -> Vec<fedsim_core::Sample> {
    gen_batch(
        &mut derive_seed(run_seed, STREAM_EVALUATION).rng(),
        EVALUATION_SAMPLES,
    )
}

/// Drives rounds over an already connected transport until the stop
/// condition holds. `sink` sees each round's metrics as soon as it ends.
pub fn run_with_transport<T, F>(
    config: &ExperimentConfig,
    transport: &mut T,
    mut sink: F,
) -> Result<RunOutcome, RuntimeError>
where
    T: Transport + ?Sized,
    F: FnMut(&RoundMetrics) -> std::io::Result<()>,
{
    config.validate()?;
    let start = Instant::now();
    let eval = evaluation_batch(config.seed);
    let mut selection = derive_seed(config.seed, STREAM_SELECTION).rng();
    let clients = config.client_ids();
    let k = config.subset_size as usize;
    let passes = config.client.passes_per_assignment();

    let mut model = initial_weights(config.init);
    let mut metrics = Vec::new();
    let mut epochs = 0u64;
    let mut round = 0u32;
    loop {
        let more = match config.stop {
            StopCondition::Rounds(r) => round < r,
            StopCondition::Duration(d) => start.elapsed() < d,
        };
        if !more {
            break;
        }
        let outcome = server_round(transport, &model, round, &clients, k, &mut selection)?;
        model = outcome.model;
        epochs += passes * outcome.participants.len() as u64;
        let m = RoundMetrics {
            round,
            elapsed_s: start.elapsed().as_secs_f64(),
            epochs,
            mse: ann::mse(&model, &eval),
        };
        sink(&m).map_err(RuntimeError::Sink)?;
        metrics.push(m);
        round += 1;
    }
    transport.shutdown()?;
    Ok(RunOutcome { metrics, model })
}

/// Runs a whole experiment in the configured mode.
pub fn run<F>(config: &ExperimentConfig, sink: F) -> Result<RunOutcome, RuntimeError>
where
    F: FnMut(&RoundMetrics) -> std::io::Result<()>,
{
    config.validate()?;
    match &config.mode {
        Mode::Concurrent => {
            let mut transport = ChannelTransport::spawn(config);
            run_with_transport(config, &mut transport, sink)
        }
        Mode::Distributed(opts) => {
            let server = DistributedServer::bind(&opts.listen)?;
            let addr = server.local_addr();
            let mut children = match &opts.worker_cmd {
                Some(template) => spawn_workers(template, addr, config)?,
                None => WorkerProcesses::default(),
            };
            let result = server
                .accept_workers(config.n_clients, opts.handshake_timeout)
                .and_then(|mut transport| run_with_transport(config, &mut transport, sink));
            match result {
                Ok(outcome) => {
                    let failed = children.wait();
                    if failed.is_empty() {
                        Ok(outcome)
                    } else {
                        Err(RuntimeError::WorkersFailed { clients: failed })
                    }
                }
                Err(e) => {
                    children.kill();
                    Err(e)
                }
            }
        }
    }
}
