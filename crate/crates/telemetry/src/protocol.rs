//! Wire format. Every websocket text message is one JSON envelope
//! `{"type": ..., "seq": n, "payload": ...}`.

use furrow_core::teleop::{ControlMessage, TeleopCommand, TelemetryFrame};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum Message {
    Frame(TelemetryFrame),
    Command(TeleopCommand),
    Control(ControlMessage),
    Error(ErrorPayload),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    /// Sender-assigned, increasing per sender.
    pub seq: u64,
    #[serde(flatten)]
    pub message: Message,
}

impl Envelope {
    pub fn new(seq: u64, message: Message) -> Self {
        Self { seq, message }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("envelopes always serialize")
    }

    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Not valid JSON or not a known envelope.
    Malformed,
    /// Well formed but refused, e.g. an out-of-range value.
    Rejected,
    /// Observers may not send commands or controls.
    NotDriver,
    /// Another driver connected; this client is now an observer.
    Demoted,
    /// A frame or control sent by a client; only the server sends frames.
    Unexpected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub code: ErrorCode,
    pub message: String,
    /// `seq` of the client message that caused the error, when known.
    #[serde(default)]
    pub in_reply_to: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Driver,
    #[default]
    Observer,
}
