//! Client side of the TCP protocol.

use std::net::{TcpStream, ToSocketAddrs};
use std::thread;
use std::time::{Duration, Instant};

use fedsim_core::protocol::PROTOCOL_VERSION;
use fedsim_core::{ErrorReason, Message};

use crate::runtime::{ClientOptions, ClientState};
use crate::wire::{read_frame, write_frame, WireError};

#[derive(Debug, thiserror::Error)]
pub enum WorkerError {
    #[error("cannot connect: {0}")]
    Connect(std::io::Error),
    #[error("server rejected the handshake: {0:?}")]
    Rejected(ErrorReason),
    #[error("server sent ERROR {0:?}")]
    ServerError(ErrorReason),
    #[error("unexpected message type 0x{0:02X}")]
    Unexpected(u8),
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// What a worker did before it was told to shut down.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WorkerSummary {
    pub assignments: u64,
}

/// Connects, retrying refused connections for up to `connect_timeout`.
pub fn connect<A: ToSocketAddrs>(
    addr: A,
    connect_timeout: Duration,
) -> Result<TcpStream, WorkerError> {
    let deadline = Instant::now() + connect_timeout;
    loop {
        match TcpStream::connect(&addr) {
            Ok(s) => return Ok(s),
            Err(e) if Instant::now() < deadline => {
                if e.kind() != std::io::ErrorKind::ConnectionRefused {
                    return Err(WorkerError::Connect(e));
                }
                thread::sleep(Duration::from_millis(20));
            }
            Err(e) => return Err(WorkerError::Connect(e)),
        }
    }
}

/// Runs one worker until the server sends SHUTDOWN.
///
/// `seed` is the client's own stream seed, not the run seed.
pub fn run_worker<A: ToSocketAddrs>(
    addr: A,
    client_id: u32,
    seed: u64,
    options: ClientOptions,
) -> Result<WorkerSummary, WorkerError> {
    let stream = connect(addr, Duration::from_secs(5))?;
    serve(stream, client_id, seed, options)
}

/// Worker loop over an established connection.
pub fn serve(
    mut stream: TcpStream,
    client_id: u32,
    seed: u64,
    options: ClientOptions,
) -> Result<WorkerSummary, WorkerError> {
    let _ = stream.set_nodelay(true);
    write_frame(
        &mut stream,
        &Message::Hello {
            version: PROTOCOL_VERSION,
            client_id,
        },
    )
    .map_err(WireError::from)?;
    match read_frame(&mut stream)? {
        Message::Ack => {}
        Message::Error(reason) => return Err(WorkerError::Rejected(reason)),
        other => return Err(WorkerError::Unexpected(other.type_byte())),
    }

    let mut client = ClientState::new(client_id, seed, options);
    let mut summary = WorkerSummary::default();
    loop {
        let msg = match read_frame(&mut stream) {
            Ok(msg) => msg,
            Err(WireError::Decode(e)) => {
                let _ = write_frame(&mut stream, &Message::Error(ErrorReason::MalformedFrame));
                return Err(WireError::Decode(e).into());
            }
            Err(e) => return Err(e.into()),
        };
        match msg {
            Message::Assignment(a) => {
                let update = client.step(&a);
                write_frame(&mut stream, &Message::Update(update)).map_err(WireError::from)?;
                summary.assignments += 1;
            }
            Message::Shutdown => return Ok(summary),
            Message::Error(reason) => return Err(WorkerError::ServerError(reason)),
            other => {
                let _ = write_frame(&mut stream, &Message::Error(ErrorReason::ProtocolViolation));
                return Err(WorkerError::Unexpected(other.type_byte()));
            }
        }
    }
}
