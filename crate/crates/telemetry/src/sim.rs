use crate::protocol::{Envelope, ErrorCode, ErrorPayload, Message, Role};
use crate::TelemetryError;
use furrow_core::teleop::{ControlMessage, TeleopSession};
use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;
use tokio::sync::{broadcast, mpsc, watch};
use tokio::time::MissedTickBehavior;

/// Events from connection tasks to the simulation task.
#[derive(Debug)]
pub enum Inbound {
    Connect {
        id: u64,
        role: Role,
        direct: mpsc::UnboundedSender<Arc<str>>,
    },
    Disconnect {
        id: u64,
    },
    Text {
        id: u64,
        text: String,
    },
}

struct Hub {
    seq: u64,
    clients: HashMap<u64, mpsc::UnboundedSender<Arc<str>>>,
    driver: Option<u64>,
    frames: broadcast::Sender<Arc<str>>,
    record_dir: Option<PathBuf>,
}

impl Hub {
    fn envelope(&mut self, message: Message) -> Arc<str> {
        self.seq += 1;
        Envelope::new(self.seq, message).to_json().into()
    }

    fn broadcast(&mut self, message: Message) {
        let text = self.envelope(message);
        // no subscribers is fine
        let _ = self.frames.send(text);
    }

    fn send_to(&mut self, id: u64, message: Message) {
        let text = self.envelope(message);
        if let Some(tx) = self.clients.get(&id) {
            let _ = tx.send(text);
        }
    }

    fn error_to(&mut self, id: u64, code: ErrorCode, message: String, in_reply_to: Option<u64>) {
        self.send_to(
            id,
            Message::Error(ErrorPayload {
                code,
                message,
                in_reply_to,
            }),
        );
    }

    fn save_trace(&self, session: &TeleopSession) {
        let Some(dir) = &self.record_dir else { return };
        let path = dir.join(format!("session_{:04}.jsonl", session.frame().episode));
        if let Err(e) = std::fs::create_dir_all(dir).map_err(|e| e.to_string()).and_then(|_| session.trace().save(&path).map_err(|e| e.to_string())) {
            log::error!("cannot record {}: {e}", path.display());
        } else {
            log::info!("recorded {}", path.display());
        }
    }

    fn handle(&mut self, session: &mut TeleopSession, ev: Inbound) {
        match ev {
            Inbound::Connect { id, role, direct } => {
                self.clients.insert(id, direct);
                if role == Role::Driver {
                    if let Some(old) = self.driver.replace(id) {
                        self.error_to(old, ErrorCode::Demoted, format!("client {id} took over driving"), None);
                    }
                }
                log::info!("client {id} connected as {role:?}");
                self.send_to(id, Message::Frame(session.frame()));
            }
            Inbound::Disconnect { id } => {
                self.clients.remove(&id);
                if self.driver == Some(id) {
                    self.driver = None;
                }
                log::info!("client {id} disconnected");
            }
            Inbound::Text { id, text } => {
                let env = match Envelope::parse(&text) {
                    Ok(env) => env,
                    Err(e) => return self.error_to(id, ErrorCode::Malformed, e.to_string(), None),
                };
                let seq = Some(env.seq);
                let is_driver = self.driver == Some(id);
                match env.message {
                    Message::Command(_) | Message::Control(_) if !is_driver => {
                        self.error_to(id, ErrorCode::NotDriver, "observers cannot send commands".into(), seq)
                    }
                    Message::Command(cmd) => {
                        if let Err(e) = session.apply_command(cmd) {
                            self.error_to(id, ErrorCode::Rejected, e.to_string(), seq);
                        }
                    }
                    Message::Control(ctrl) => {
                        if matches!(ctrl, ControlMessage::Reset { .. }) {
                            self.save_trace(session);
                        }
                        match session.control(&ctrl) {
                            Ok(()) => self.broadcast(Message::Frame(session.frame())),
                            Err(e) => self.error_to(id, ErrorCode::Rejected, e.to_string(), seq),
                        }
                    }
                    Message::Frame(_) | Message::Error(_) => {
                        self.error_to(id, ErrorCode::Unexpected, "clients send only commands and controls".into(), seq)
                    }
                }
            }
        }
    }
}

pub(crate) async fn run(
    mut session: TeleopSession,
    tick: Duration,
    record_dir: Option<PathBuf>,
    mut inbound: mpsc::UnboundedReceiver<Inbound>,
    frames: broadcast::Sender<Arc<str>>,
    mut shutdown: watch::Receiver<bool>,
) -> Result<(), TelemetryError> {
    let mut hub = Hub {
        seq: 0,
        clients: HashMap::new(),
        driver: None,
        frames,
        record_dir,
    };
    let mut interval = tokio::time::interval(tick);
    interval.set_missed_tick_behavior(MissedTickBehavior::Delay);
    interval.tick().await;
    loop {
        tokio::select! {
            biased;
            _ = shutdown.changed() => break,
            Some(ev) = inbound.recv() => hub.handle(&mut session, ev),
            _ = interval.tick() => {
                // anything queued before this step applies to it
                while let Ok(ev) = inbound.try_recv() {
                    hub.handle(&mut session, ev);
                }
                match session.step() {
                    Ok(Some(frame)) => hub.broadcast(Message::Frame(frame)),
                    Ok(None) => {}
                    Err(e) => {
                        log::error!("step failed, pausing: {e}");
                        let _ = session.control(&ControlMessage::Pause);
                        hub.broadcast(Message::Error(ErrorPayload {
                            code: ErrorCode::Rejected,
                            message: format!("simulation paused: {e}"),
                            in_reply_to: None,
                        }));
                    }
                }
            }
        }
    }
    hub.save_trace(&session);
    Ok(())
}
