use std::collections::BTreeMap;
use std::io;
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{channel, Receiver};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use fedsim_core::datagen::client_seed;
use fedsim_core::protocol::PROTOCOL_VERSION;
use fedsim_core::{Assignment, ErrorReason, GradientMode, Message, Update};

use super::{ExperimentConfig, LocalTraining, RuntimeError, Transport};
use crate::wire::{read_frame, write_frame, WireError};

/// Listening socket of a distributed run, before workers have connected.
pub struct DistributedServer {
    listener: TcpListener,
    addr: SocketAddr,
}

impl DistributedServer {
    pub fn bind(listen: &str) -> Result<Self, RuntimeError> {
        let bind_err = |source| RuntimeError::Bind {
            addr: listen.to_string(),
            source,
        };
        let listener = TcpListener::bind(listen).map_err(bind_err)?;
        let addr = listener.local_addr().map_err(bind_err)?;
        Ok(DistributedServer { listener, addr })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Accepts connections until every client id in `0..n_clients` has
    /// completed the HELLO/ACK handshake, or `timeout` elapses.
    ///
    /// Connections with a foreign protocol version, an out-of-range or
    /// duplicate client id, or a malformed first frame get an ERROR frame and
    /// are closed; the server keeps waiting for the remaining workers.
    pub fn accept_workers(
        self,
        n_clients: u32,
        timeout: Duration,
    ) -> Result<TcpTransport, RuntimeError> {
        let expected = n_clients as usize;
        let deadline = Instant::now() + timeout;
        let io_err = |source: io::Error| RuntimeError::Bind {
            addr: self.addr.to_string(),
            source,
        };
        self.listener.set_nonblocking(true).map_err(io_err)?;

        let mut streams: BTreeMap<u32, TcpStream> = BTreeMap::new();
        while streams.len() < expected {
            let now = Instant::now();
            let (mut stream, _) = match self.listener.accept() {
                Ok(conn) => conn,
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                    if now >= deadline {
                        return Err(RuntimeError::HandshakeTimeout {
                            connected: streams.len(),
                            expected,
                        });
                    }
                    thread::sleep(Duration::from_millis(2));
                    continue;
                }
                Err(e) => return Err(io_err(e)),
            };
            let remaining = deadline
                .saturating_duration_since(now)
                .max(Duration::from_millis(10));
            if stream.set_nonblocking(false).is_err()
                || stream.set_read_timeout(Some(remaining)).is_err()
            {
                continue;
            }
            let reply = match read_frame(&mut stream) {
                Ok(Message::Hello { version, .. }) if version != PROTOCOL_VERSION => {
                    Err(ErrorReason::VersionMismatch)
                }
                Ok(Message::Hello { client_id, .. })
                    if client_id >= n_clients || streams.contains_key(&client_id) =>
                {
                    Err(ErrorReason::UnknownClient)
                }
                Ok(Message::Hello { client_id, .. }) => Ok(client_id),
                Ok(_) => Err(ErrorReason::ProtocolViolation),
                Err(_) => Err(ErrorReason::MalformedFrame),
            };
            match reply {
                Ok(client_id) => {
                    let ready = write_frame(&mut stream, &Message::Ack)
                        .and_then(|_| stream.set_read_timeout(None))
                        .and_then(|_| stream.set_nodelay(true));
                    if ready.is_ok() {
                        streams.insert(client_id, stream);
                    }
                }
                Err(reason) => {
                    let _ = write_frame(&mut stream, &Message::Error(reason));
                    let _ = stream.shutdown(Shutdown::Both);
                }
            }
        }
        TcpTransport::start(streams)
    }
}

type Event = (u32, Result<Message, WireError>);

/// Server side of TCP-connected workers. One reader thread per connection
/// forwards decoded frames into a single mailbox.
pub struct TcpTransport {
    writers: BTreeMap<u32, TcpStream>,
    events: Receiver<Event>,
    readers: Vec<JoinHandle<()>>,
}

impl TcpTransport {
    fn start(writers: BTreeMap<u32, TcpStream>) -> Result<Self, RuntimeError> {
        let (tx, events) = channel();
        let mut readers = Vec::new();
        for (&id, stream) in &writers {
            let mut read_half = stream.try_clone().map_err(|e| RuntimeError::Transport {
                client: id,
                source: WireError::Io(e),
            })?;
            let tx = tx.clone();
            readers.push(thread::spawn(move || loop {
                let event = read_frame(&mut read_half);
                let stop = event.is_err();
                if tx.send((id, event)).is_err() || stop {
                    break;
                }
            }));
        }
        Ok(TcpTransport {
            writers,
            events,
            readers,
        })
    }

    fn close(&mut self) {
        for stream in self.writers.values() {
            let _ = stream.shutdown(Shutdown::Both);
        }
        for h in self.readers.drain(..) {
            let _ = h.join();
        }
    }
}

impl Transport for TcpTransport {
    fn dispatch(&mut self, client: u32, assignment: &Assignment) -> Result<(), RuntimeError> {
        let stream = self
            .writers
            .get_mut(&client)
            .ok_or_else(|| RuntimeError::Config(format!("no worker for client {client}")))?;
        write_frame(stream, &Message::Assignment(*assignment)).map_err(|e| {
            RuntimeError::Transport {
                client,
                source: WireError::Io(e),
            }
        })
    }

    fn next_update(&mut self) -> Result<Update, RuntimeError> {
        let (client, event) = self.events.recv().map_err(|_| RuntimeError::ClientsGone)?;
        match event {
            Ok(Message::Update(u)) if u.client_id == client => Ok(u),
            Ok(Message::Update(u)) => Err(RuntimeError::Protocol {
                client,
                detail: format!("update claims client id {}", u.client_id),
            }),
            Ok(Message::Error(reason)) => Err(RuntimeError::Rejected { client, reason }),
            Ok(other) => {
                if let Some(stream) = self.writers.get_mut(&client) {
                    let _ = write_frame(stream, &Message::Error(ErrorReason::ProtocolViolation));
                }
                Err(RuntimeError::Protocol {
                    client,
                    detail: format!("unexpected message type 0x{:02X}", other.type_byte()),
                })
            }
            Err(source) => {
                if let (WireError::Decode(_), Some(stream)) =
                    (&source, self.writers.get_mut(&client))
                {
                    let _ = write_frame(stream, &Message::Error(ErrorReason::MalformedFrame));
                }
                Err(RuntimeError::Transport { client, source })
            }
        }
    }

    fn shutdown(&mut self) -> Result<(), RuntimeError> {
        let mut first_err = None;
        for (&client, stream) in self.writers.iter_mut() {
            if let Err(e) = write_frame(stream, &Message::Shutdown) {
                first_err.get_or_insert(RuntimeError::Transport {
                    client,
                    source: WireError::Io(e),
                });
            }
        }
        self.close();
        first_err.map_or(Ok(()), Err)
    }
}

impl Drop for TcpTransport {
    fn drop(&mut self) {
        self.close();
    }
}

/// Worker processes spawned for a distributed run.
#[derive(Default)]
pub struct WorkerProcesses {
    children: Vec<(u32, Child)>,
}

impl WorkerProcesses {
    pub fn len(&self) -> usize {
        self.children.len()
    }

    pub fn is_empty(&self) -> bool {
        self.children.is_empty()
    }

    /// Waits for every worker to exit; returns the ids of those that failed.
    pub fn wait(&mut self) -> Vec<u32> {
        self.children
            .drain(..)
            .filter_map(|(id, mut child)| match child.wait() {
                Ok(status) if status.success() => None,
                _ => Some(id),
            })
            .collect()
    }

    pub fn kill(&mut self) {
        for (_, child) in self.children.iter_mut() {
            let _ = child.kill();
        }
        self.wait();
    }
}

impl Drop for WorkerProcesses {
    fn drop(&mut self) {
        self.kill();
    }
}

/// Expands a worker command template for one client.
///
/// The template is split on whitespace. Placeholders: `{addr}` (server
/// address), `{id}` (client id), `{seed}` (the client's derived stream seed),
/// `{run_seed}`, `{samples}`, `{gradient_mode}` (`paper` or `classic`),
/// `{local_epochs}`, and `{client_flags}`, a whole-token placeholder that
/// expands to the `fedsim-worker` flags reproducing the configuration.
pub fn worker_command_line(
    template: &str,
    addr: SocketAddr,
    client_id: u32,
    config: &ExperimentConfig,
) -> Vec<String> {
    let opts = &config.client;
    let mode = match opts.gradient_mode {
        GradientMode::PaperFaithful => "paper",
        GradientMode::Classic => "classic",
    };
    let epochs = match opts.local_training {
        LocalTraining::Sequential { epochs } => epochs,
        LocalTraining::FullBatchStep => 1,
    };
    let mut flags = vec![
        "--samples".to_string(),
        opts.samples_per_round.to_string(),
        "--gradient-mode".to_string(),
        mode.to_string(),
    ];
    match opts.local_training {
        LocalTraining::Sequential { epochs } => {
            flags.extend(["--local-epochs".to_string(), epochs.to_string()])
        }
        LocalTraining::FullBatchStep => flags.extend([
            "--full-batch-step".to_string(),
            "--eta".to_string(),
            opts.eta.get().to_string(),
        ]),
    }

    let mut args = Vec::new();
    for token in template.split_whitespace() {
        if token == "{client_flags}" {
            args.extend(flags.iter().cloned());
            continue;
        }
        args.push(
            token
                .replace("{addr}", &addr.to_string())
                .replace("{id}", &client_id.to_string())
                .replace("{seed}", &client_seed(config.seed, client_id).0.to_string())
                .replace("{run_seed}", &config.seed.to_string())
                .replace("{samples}", &opts.samples_per_round.to_string())
                .replace("{gradient_mode}", mode)
                .replace("{local_epochs}", &epochs.to_string()),
        );
    }
    args
}

/// Starts one worker process per client from `template`.
pub fn spawn_workers(
    template: &str,
    addr: SocketAddr,
    config: &ExperimentConfig,
) -> Result<WorkerProcesses, RuntimeError> {
    let mut procs = WorkerProcesses::default();
    for id in config.client_ids() {
        let args = worker_command_line(template, addr, id, config);
        let (program, rest) = args
            .split_first()
            .ok_or_else(|| RuntimeError::Config("empty worker command".into()))?;
        let child = Command::new(program)
            .args(rest)
            .stdin(Stdio::null())
            .spawn()
            .map_err(|source| RuntimeError::Spawn { client: id, source })?;
        procs.children.push((id, child));
    }
    Ok(procs)
}
