//! Session service for interactive front ends.
//!
//! One session per connection. A client opens with `StartSession`, then
//! streams `PoseUpdate`s; each one is answered with a `FeedbackUpdate`, and a
//! `DeviceHealth` whenever the fault flags change. A session either uses the
//! simulated sensor mount, or, if the client sends a `SensorUpdate` before
//! its first pose, device readings: every pose must then be preceded by a
//! reading with the same timestamp. The server closes with `EndSession`
//! on completion, on a client `EndSession`, or on a protocol error.

use std::io::{BufReader, BufWriter, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::thread;

use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::feedback::{AudioCue, Phase};
use crate::geometry::{LinePath, ScissorsPose};
use crate::protocol::session::{
    read_message, write_message, DeviceHealth, Direction, EndSession, FeedbackUpdate, SessionGuard,
    SessionMessage, StartSession,
};
use crate::sensing::SensorReading;
use crate::simulation::{Pipeline, ReadingSource, SessionTrace, TraceHeader, TraceRecord};

#[derive(Debug, Clone, Default)]
pub struct ServiceOptions {
    /// Used when `StartSession` carries no configuration.
    pub config: EngineConfig,
    /// Seeds each session's fault stream.
    pub seed: u64,
    /// Directory for `<session_id>.trace` recordings.
    pub record_dir: Option<PathBuf>,
}

/// How a session ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionOutcome {
    pub session_id: Option<String>,
    pub reason: String,
    pub records: usize,
    pub trace_file: Option<PathBuf>,
}

/// Accepts connections forever, one thread per session.
pub fn serve(listener: TcpListener, options: ServiceOptions) -> Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let options = options.clone();
        thread::spawn(move || {
            let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
            match handle_connection(stream, &options) {
                Ok(outcome) => eprintln!("session {peer}: {}", outcome.reason),
                Err(e) => eprintln!("session {peer}: {e}"),
            }
        });
    }
    Ok(())
}

pub fn handle_connection(stream: TcpStream, options: &ServiceOptions) -> Result<SessionOutcome> {
    stream.set_nodelay(true)?;
    let reader = BufReader::new(stream.try_clone()?);
    let writer = BufWriter::new(stream);
    run_session(reader, writer, options)
}

struct Session {
    id: String,
    pipeline: Pipeline,
    header: TraceHeader,
    records: Vec<TraceRecord>,
    readings: Option<ReadingSource>,
    pending: Option<SensorReading>,
    faults: (bool, bool),
}

impl Session {
    fn open(start: StartSession, options: &ServiceOptions) -> Result<Self> {
        let path = LinePath::try_from(start.path)?;
        let mut config = start.config.unwrap_or_else(|| options.config.clone());
        if let Some(mode) = start.mode {
            config.mode = mode;
        }
        let pipeline = Pipeline::new(path.clone(), config.clone(), options.seed)?;
        Ok(Session {
            id: start.session_id,
            header: TraceHeader::new("serve", &path, &config, options.seed),
            pipeline,
            records: Vec::new(),
            readings: None,
            pending: None,
            faults: (false, false),
        })
    }

    fn sensor_update(&mut self, reading: SensorReading) -> Result<()> {
        match self.readings {
            Some(ReadingSource::Simulated) => Err(Error::Protocol(
                "SensorUpdate in a session that started without device readings".into(),
            )),
            _ => {
                self.readings = Some(ReadingSource::Device);
                self.pending = Some(reading);
                Ok(())
            }
        }
    }

    fn pose_update(&mut self, pose: ScissorsPose<f64>) -> Result<Vec<SessionMessage>> {
        let source = *self.readings.get_or_insert(ReadingSource::Simulated);
        let record = match source {
            ReadingSource::Simulated => self.pipeline.tick(pose)?,
            ReadingSource::Device => match self.pending.take() {
                Some(r) if r.timestamp == pose.timestamp => self.pipeline.tick_with_reading(pose, r)?,
                _ => {
                    return Err(Error::Protocol(format!(
                        "PoseUpdate at {} has no SensorUpdate with the same timestamp",
                        pose.timestamp
                    )))
                }
            },
        };

        let mut out = Vec::new();
        let faults = (record.reading.left_fault, record.reading.right_fault);
        if faults != self.faults {
            self.faults = faults;
            out.push(SessionMessage::DeviceHealth(DeviceHealth {
                timestamp: record.timestamp(),
                left_fault: faults.0,
                right_fault: faults.1,
            }));
        }
        let state = record.state;
        let remaining = match state.phase {
            Phase::OnTrack | Phase::Completed => 0,
            phase => (state.phase_entered_at + self.pipeline.config().feedback.min_display(phase))
                .saturating_sub(record.timestamp()),
        };
        out.push(SessionMessage::FeedbackUpdate(FeedbackUpdate {
            timestamp: record.timestamp(),
            phase: state.phase,
            severity: record.severity,
            frame: record.frame,
            cues: record.cues.iter().map(|&c| AudioCue::from(c)).collect(),
            progress: record.progress,
            min_display_ms: remaining,
        }));
        self.records.push(record);
        Ok(out)
    }

    fn is_completed(&self) -> bool {
        self.pipeline.state().is_some_and(|s| s.phase == Phase::Completed)
    }

    fn save(mut self, dir: &std::path::Path) -> Result<Option<PathBuf>> {
        if self.records.is_empty() {
            return Ok(None);
        }
        self.header.readings = self.readings.unwrap_or_default();
        self.header.end_time_ms = self.records.last().map_or(0, |r| r.timestamp());
        let name: String = self
            .id
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect();
        let file = dir.join(format!("{name}.trace"));
        SessionTrace {
            header: self.header,
            records: self.records,
        }
        .write(&file)?;
        Ok(Some(file))
    }
}

/// Drives one session over an arbitrary byte stream pair.
pub fn run_session<R: Read, W: Write>(mut reader: R, mut writer: W, options: &ServiceOptions) -> Result<SessionOutcome> {
    let mut guard = SessionGuard::new();
    let mut session: Option<Session> = None;

    let reason = loop {
        let message = match read_message(&mut reader) {
            Ok(Some(m)) => m,
            Ok(None) => break "connection closed".to_string(),
            Err(e) => break format!("error: {e}"),
        };
        if let Err(e) = guard.check(&message, Direction::ClientToServer) {
            break format!("error: {e}");
        }
        let result = match message {
            SessionMessage::StartSession(start) => Session::open(*start, options).map(|s| {
                session = Some(s);
                Vec::new()
            }),
            SessionMessage::SensorUpdate(reading) => match session.as_mut() {
                Some(s) => s.sensor_update(reading).map(|_| Vec::new()),
                None => unreachable!("guard admits updates only after start"),
            },
            SessionMessage::PoseUpdate(pose) => match session.as_mut() {
                Some(s) => s.pose_update(pose),
                None => unreachable!("guard admits updates only after start"),
            },
            SessionMessage::EndSession(end) => break format!("client ended: {}", end.reason),
            _ => unreachable!("guard rejects server-only messages from the client"),
        };
        match result {
            Ok(replies) => {
                for reply in &replies {
                    write_message(&mut writer, reply)?;
                }
            }
            Err(e) => break format!("error: {e}"),
        }
        if session.as_ref().is_some_and(Session::is_completed) {
            break "completed".to_string();
        }
    };

    let mut outcome = SessionOutcome {
        session_id: session.as_ref().map(|s| s.id.clone()),
        reason: reason.clone(),
        records: session.as_ref().map_or(0, |s| s.records.len()),
        trace_file: None,
    };
    // Saved before EndSession goes out, so a client that sees it can rely on
    // the trace being on disk.
    let saved = match (session, options.record_dir.as_deref()) {
        (Some(s), Some(dir)) => s.save(dir),
        _ => Ok(None),
    };
    if !guard.is_ended() {
        let end = SessionMessage::EndSession(EndSession { reason });
        // The peer may already be gone; the outcome is reported either way.
        let _ = write_message(&mut writer, &end);
    }
    outcome.trace_file = saved?;
    Ok(outcome)
}
