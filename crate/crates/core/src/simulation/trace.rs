//! Session trace files (`*.trace`).
//!
//! Newline-delimited JSON: one `header` line, one `record` line per tick and
//! a closing `footer` line holding the record count and a SHA-256 digest of
//! the record lines. Headers carry no wall-clock time.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::feedback::{CueKind, FeedbackState, VisualFrame};
use crate::geometry::{DeviationMeasure, LinePath, PathFile, ScissorsPose};
use crate::sensing::{SensorReading, Severity};

pub const TRACE_FORMAT: &str = "chameleon-trace";
pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHeader {
    pub format: String,
    pub version: u32,
    /// What produced the trace: `simulate` or `serve`.
    pub source: String,
    pub path: PathFile<f64>,
    pub config: EngineConfig,
    pub seed: u64,
    /// SHA-256 over path, config and seed.
    pub config_hash: String,
    /// Where sensor readings came from.
    #[serde(default)]
    pub readings: ReadingSource,
    /// The run hit `max_duration_ms` before completing.
    pub truncated: bool,
    /// Logical clock at the last record, ms.
    pub end_time_ms: u64,
}

impl TraceHeader {
    pub fn new(source: &str, path: &LinePath<f64>, config: &EngineConfig, seed: u64) -> Self {
        let path = PathFile::from(path.clone());
        TraceHeader {
            format: TRACE_FORMAT.into(),
            version: TRACE_VERSION,
            source: source.into(),
            config_hash: config_hash(&path, config, seed),
            path,
            config: config.clone(),
            seed,
            readings: ReadingSource::Simulated,
            truncated: false,
            end_time_ms: 0,
        }
    }
}

/// Hex SHA-256 of the canonical JSON of `(path, config, seed)`.
pub fn config_hash(path: &PathFile<f64>, config: &EngineConfig, seed: u64) -> String {
    let canonical = serde_json::to_vec(&(path, config, seed)).expect("config serializes");
    hex::encode(Sha256::digest(&canonical))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReadingSource {
    /// Sampled from the simulated mount; replay recomputes them from poses.
    #[default]
    Simulated,
    /// Reported by a device; replay feeds the recorded readings.
    Device,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub pose: ScissorsPose<f64>,
    pub reading: SensorReading,
    pub deviation: DeviationMeasure<f64>,
    pub progress: f64,
    /// Severity that drove the state machine on this tick.
    pub severity: Severity,
    pub state: FeedbackState,
    pub frame: VisualFrame,
    pub cues: Vec<CueKind>,
}

impl TraceRecord {
    pub fn timestamp(&self) -> u64 {
        self.pose.timestamp
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceFooter {
    records: usize,
    digest: String,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum TraceLine {
    Header(TraceHeader),
    Record(TraceRecord),
    Footer(TraceFooter),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionTrace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
}

impl SessionTrace {
    /// Serializes to the line format, footer included.
    pub fn to_ndjson(&self) -> String {
        let mut out = line(&TraceLine::Header(self.header.clone()));
        let mut digest = Sha256::new();
        for record in &self.records {
            let l = line(&TraceLine::Record(record.clone()));
            digest.update(l.as_bytes());
            out.push_str(&l);
        }
        out.push_str(&line(&TraceLine::Footer(TraceFooter {
            records: self.records.len(),
            digest: hex::encode(digest.finalize()),
        })));
        out
    }

    /// Parses the line format. Checks the format tag, version, config hash,
    /// record count and record digest.
    pub fn from_ndjson(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let header = match lines.next() {
            Some((n, l)) => match parse_line(n, l)? {
                TraceLine::Header(h) => h,
                _ => return Err(Error::TraceFormat("first line is not a header".into())),
            },
            None => return Err(Error::EmptyTrace),
        };
        if header.format != TRACE_FORMAT {
            return Err(Error::TraceFormat(format!("unknown format tag `{}`", header.format)));
        }
        if header.version != TRACE_VERSION {
            return Err(Error::UnsupportedVersion {
                found: header.version,
                supported: TRACE_VERSION,
            });
        }
        let computed = config_hash(&header.path, &header.config, header.seed);
        if computed != header.config_hash {
            return Err(Error::ConfigHashMismatch {
                recorded: header.config_hash.clone(),
                computed,
            });
        }

        let mut records = Vec::new();
        let mut digest = Sha256::new();
        let mut footer = None;
        for (n, l) in lines {
            if footer.is_some() {
                return Err(Error::TraceFormat(format!("line {}: content after footer", n + 1)));
            }
            match parse_line(n, l)? {
                TraceLine::Record(r) => {
                    digest.update(l.as_bytes());
                    digest.update(b"\n");
                    records.push(r);
                }
                TraceLine::Footer(f) => footer = Some(f),
                TraceLine::Header(_) => {
                    return Err(Error::TraceFormat(format!("line {}: second header", n + 1)))
                }
            }
        }
        let footer = footer.ok_or_else(|| Error::TraceFormat("missing footer".into()))?;
        if footer.records != records.len() {
            return Err(Error::TraceFormat(format!(
                "footer counts {} records, found {}",
                footer.records,
                records.len()
            )));
        }
        let computed = hex::encode(digest.finalize());
        if computed != footer.digest {
            return Err(Error::DigestMismatch {
                recorded: footer.digest,
                computed,
            });
        }
        Ok(SessionTrace { header, records })
    }

    pub fn path(&self) -> Result<LinePath<f64>> {
        LinePath::try_from(self.header.path.clone())
    }

    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_ndjson()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_ndjson(&text)
    }
}

fn line(l: &TraceLine) -> String {
    let mut s = serde_json::to_string(l).expect("trace lines serialize");
    s.push('\n');
    s
}

fn parse_line(n: usize, l: &str) -> Result<TraceLine> {
    serde_json::from_str(l).map_err(|e| Error::TraceFormat(format!("line {}: {e}", n + 1)))
}
