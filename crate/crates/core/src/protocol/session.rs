//! Host-to-UI session protocol.
//!
//! Each message is a JSON object `{"v": 1, "kind": "...", "body": {...}}`
//! carried in a frame of a 4-byte big-endian length followed by that many
//! bytes of UTF-8. See `docs/session-protocol.md` for the schema.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::config::{EngineConfig, SeverityMode};
use crate::feedback::{AudioCue, Phase, VisualFrame};
use crate::geometry::{PathFile, ScissorsPose};
use crate::sensing::{SensorReading, Severity};
use crate::error::{Error, Result};

pub const SESSION_PROTOCOL_VERSION: u32 = 1;
/// Upper bound on a single message body.
pub const MAX_MESSAGE_LEN: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSession {
    pub session_id: String,
    pub path: PathFile<f64>,
    #[serde(default)]
    pub mode: Option<SeverityMode>,
    /// Overrides the server's engine configuration for this session.
    #[serde(default)]
    pub config: Option<EngineConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackUpdate {
    pub timestamp: u64,
    pub phase: Phase,
    pub severity: Severity,
    pub frame: VisualFrame,
    pub cues: Vec<AudioCue>,
    pub progress: f64,
    /// Minimum time the frame must stay up before a milder one may replace
    /// it, ms. Zero when nothing is pending.
    pub min_display_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceHealth {
    pub timestamp: u64,
    pub left_fault: bool,
    pub right_fault: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndSession {
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "body")]
pub enum SessionMessage {
    StartSession(Box<StartSession>),
    PoseUpdate(ScissorsPose<f64>),
    SensorUpdate(SensorReading),
    FeedbackUpdate(FeedbackUpdate),
    EndSession(EndSession),
    DeviceHealth(DeviceHealth),
}

impl SessionMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            SessionMessage::StartSession(_) => "StartSession",
            SessionMessage::PoseUpdate(_) => "PoseUpdate",
            SessionMessage::SensorUpdate(_) => "SensorUpdate",
            SessionMessage::FeedbackUpdate(_) => "FeedbackUpdate",
            SessionMessage::EndSession(_) => "EndSession",
            SessionMessage::DeviceHealth(_) => "DeviceHealth",
        }
    }
}

/// Versioned wire form of a [`SessionMessage`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub v: u32,
    #[serde(flatten)]
    pub message: SessionMessage,
}

pub fn to_json(message: &SessionMessage) -> Vec<u8> {
    serde_json::to_vec(&Envelope {
        v: SESSION_PROTOCOL_VERSION,
        message: message.clone(),
    })
    .expect("session messages serialize")
}

pub fn from_json(bytes: &[u8]) -> Result<SessionMessage> {
    let envelope: Envelope =
        serde_json::from_slice(bytes).map_err(|e| Error::Protocol(format!("malformed message: {e}")))?;
    if envelope.v != SESSION_PROTOCOL_VERSION {
        return Err(Error::Protocol(format!(
            "unsupported protocol version {} (expected {SESSION_PROTOCOL_VERSION})",
            envelope.v
        )));
    }
    Ok(envelope.message)
}

pub fn write_message(w: &mut impl Write, message: &SessionMessage) -> Result<()> {
    let body = to_json(message);
    w.write_all(&(body.len() as u32).to_be_bytes())?;
    w.write_all(&body)?;
    w.flush()?;
    Ok(())
}

/// Reads one framed message; `Ok(None)` on a clean end of stream.
pub fn read_message(r: &mut impl Read) -> Result<Option<SessionMessage>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_MESSAGE_LEN {
        return Err(Error::Protocol(format!("message of {len} bytes exceeds limit")));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    from_json(&body).map(Some)
}

/// Which side of the connection sent a message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ClientToServer,
    ServerToClient,
}

/// Tracks session ordering rules: nothing but `StartSession` before the
/// session starts, no second start, nothing after `EndSession`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SessionGuard {
    started: bool,
    ended: bool,
}

impl SessionGuard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_started(&self) -> bool {
        self.started
    }

    pub fn is_ended(&self) -> bool {
        self.ended
    }

    pub fn check(&mut self, message: &SessionMessage, direction: Direction) -> Result<()> {
        use SessionMessage::*;
        if self.ended {
            return Err(Error::Protocol(format!("{} after EndSession", message.kind())));
        }
        let allowed = match (message, direction) {
            (StartSession(_), Direction::ClientToServer) => !self.started,
            (StartSession(_), Direction::ServerToClient) => false,
            (PoseUpdate(_) | SensorUpdate(_), Direction::ClientToServer) => self.started,
            (FeedbackUpdate(_) | DeviceHealth(_), Direction::ServerToClient) => self.started,
            (SensorUpdate(_), Direction::ServerToClient) => self.started,
            (EndSession(_), _) => true,
            _ => false,
        };
        if !allowed {
            let state = if self.started { "started" } else { "not started" };
            return Err(Error::Protocol(format!(
                "{} not allowed from {direction:?} while session {state}",
                message.kind()
            )));
        }
        match message {
            StartSession(_) => self.started = true,
            EndSession(_) => self.ended = true,
            _ => {}
        }
        Ok(())
    }
}
