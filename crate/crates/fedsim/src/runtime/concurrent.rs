use std::collections::BTreeMap;
use std::sync::mpsc::{channel, Receiver, Sender};
use std::thread::{self, JoinHandle};

use fedsim_core::{Assignment, Update};

use super::{ClientState, ExperimentConfig, RuntimeError, Transport};

enum Command {
    Assign(Assignment),
    Shutdown,
}

/// In-process clients: one thread per client, each with a private mailbox.
pub struct ChannelTransport {
    mailboxes: BTreeMap<u32, Sender<Command>>,
    updates: Receiver<Update>,
    handles: Vec<JoinHandle<()>>,
}

impl ChannelTransport {
    pub fn spawn(config: &ExperimentConfig) -> Self {
        let (update_tx, updates) = channel();
        let mut mailboxes = BTreeMap::new();
        let mut handles = Vec::new();
        for id in config.client_ids() {
            let (tx, rx) = channel::<Command>();
            let reply = update_tx.clone();
            let mut client = ClientState::for_run(id, config.seed, config.client);
            let handle = thread::Builder::new()
                .name(format!("client-{id}"))
                .spawn(move || {
                    while let Ok(Command::Assign(a)) = rx.recv() {
                        if reply.send(client.step(&a)).is_err() {
                            break;
                        }
                    }
                })
                .expect("spawn client thread");
            mailboxes.insert(id, tx);
            handles.push(handle);
        }
        ChannelTransport {
            mailboxes,
            updates,
            handles,
        }
    }

    fn stop(&mut self) {
        for tx in self.mailboxes.values() {
            let _ = tx.send(Command::Shutdown);
        }
        self.mailboxes.clear();
        for h in self.handles.drain(..) {
            let _ = h.join();
        }
    }
}

impl Transport for ChannelTransport {
    fn dispatch(&mut self, client: u32, assignment: &Assignment) -> Result<(), RuntimeError> {
        self.mailboxes
            .get(&client)
            .ok_or_else(|| RuntimeError::Config(format!("no client {client}")))?
            .send(Command::Assign(*assignment))
            .map_err(|_| RuntimeError::ClientsGone)
    }

    fn next_update(&mut self) -> Result<Update, RuntimeError> {
        self.updates.recv().map_err(|_| RuntimeError::ClientsGone)
    }

    fn shutdown(&mut self) -> Result<(), RuntimeError> {
        self.stop();
        Ok(())
    }
}

impl Drop for ChannelTransport {
    fn drop(&mut self) {
        self.stop();
    }
}
