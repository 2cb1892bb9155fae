use crate::error::{Error, Result};

use super::pipeline::Pipeline;
use super::trace::{ReadingSource, SessionTrace, TRACE_FORMAT, TRACE_VERSION};

/// Re-runs sensing and feedback from the recorded poses.
///
/// The header is copied through, so for an untampered trace the result
/// equals the input record for record.
pub fn replay(trace: &SessionTrace) -> Result<SessionTrace> {
    let header = &trace.header;
    if header.format != TRACE_FORMAT {
        return Err(Error::TraceFormat(format!("unknown format tag `{}`", header.format)));
    }
    if header.version != TRACE_VERSION {
        return Err(Error::UnsupportedVersion {
            found: header.version,
            supported: TRACE_VERSION,
        });
    }
    let computed = super::config_hash(&header.path, &header.config, header.seed);
    if computed != header.config_hash {
        return Err(Error::ConfigHashMismatch {
            recorded: header.config_hash.clone(),
            computed,
        });
    }
    let mut pipeline = Pipeline::new(trace.path()?, header.config.clone(), header.seed)?;
    let records = trace
        .records
        .iter()
        .map(|r| match header.readings {
            ReadingSource::Simulated => pipeline.tick(r.pose),
            ReadingSource::Device => pipeline.tick_with_reading(r.pose, r.reading),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SessionTrace {
        header: header.clone(),
        records,
    })
}

/// Golden check: replays `trace` and reports the first diverging record.
pub fn verify_replay(trace: &SessionTrace) -> Result<()> {
    let replayed = replay(trace)?;
    for (index, (want, got)) in trace.records.iter().zip(&replayed.records).enumerate() {
        if want == got {
            continue;
        }
        let field = if want.pose != got.pose {
            "pose"
        } else if want.reading != got.reading {
            "reading"
        } else if want.deviation != got.deviation {
            "deviation"
        } else if want.progress != got.progress {
            "progress"
        } else if want.severity != got.severity {
            "severity"
        } else if want.state != got.state {
            "state"
        } else if want.frame != got.frame {
            "frame"
        } else {
            "cues"
        };
        return Err(Error::ReplayMismatch {
            index,
            timestamp: want.timestamp(),
            field: field.into(),
        });
    }
    Ok(())
}
