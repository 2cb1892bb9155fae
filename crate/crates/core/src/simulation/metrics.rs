use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::{CueKind, Phase};
use crate::sensing::SeverityLevel;

use super::trace::SessionTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CueCounts {
    pub keep_going: usize,
    pub uh_oh: usize,
    pub woah_there: usize,
    pub getting_better: usize,
    pub stay_on_track: usize,
    pub fanfare: usize,
}

impl CueCounts {
    pub fn get(&self, cue: CueKind) -> usize {
        match cue {
            CueKind::KeepGoing => self.keep_going,
            CueKind::UhOh => self.uh_oh,
            CueKind::WoahThere => self.woah_there,
            CueKind::GettingBetter => self.getting_better,
            CueKind::StayOnTrack => self.stay_on_track,
            CueKind::Fanfare => self.fanfare,
        }
    }

    fn bump(&mut self, cue: CueKind) {
        let slot = match cue {
            CueKind::KeepGoing => &mut self.keep_going,
            CueKind::UhOh => &mut self.uh_oh,
            CueKind::WoahThere => &mut self.woah_there,
            CueKind::GettingBetter => &mut self.getting_better,
            CueKind::StayOnTrack => &mut self.stay_on_track,
            CueKind::Fanfare => &mut self.fanfare,
        };
        *slot += 1;
    }
}

/// Summary of one session.
///
/// Correction latency runs from a corrective cue to the first later tick whose
/// severity level is strictly lower than at the cue. Cues never followed by
/// an improvement are counted in `unanswered_cues` and left out of the
/// latency statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub records: usize,
    pub duration_ms: u64,
    pub on_track_fraction: f64,
    pub cues: CueCounts,
    pub correction_latencies_ms: Vec<u64>,
    pub mean_correction_latency_ms: Option<f64>,
    pub median_correction_latency_ms: Option<f64>,
    pub unanswered_cues: usize,
    pub completion_time_ms: Option<u64>,
    /// Transitions into a more alarming phase.
    pub escalation_count: usize,
    pub truncated: bool,
}

pub fn metrics(trace: &SessionTrace) -> Result<MetricsReport> {
    let records = &trace.records;
    let (first, last) = match (records.first(), records.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::EmptyTrace),
    };

    let on_track = records
        .iter()
        .filter(|r| r.severity.level == SeverityLevel::OnTrack)
        .count();

    let mut cues = CueCounts::default();
    let mut latencies = Vec::new();
    let mut unanswered = 0;
    let mut completion_time = None;
    for (i, r) in records.iter().enumerate() {
        for &cue in &r.cues {
            cues.bump(cue);
            if cue == CueKind::Fanfare {
                completion_time = Some(r.timestamp());
            }
            if !cue.is_corrective() {
                continue;
            }
            let level = r.severity.level;
            match records[i + 1..].iter().find(|later| later.severity.level < level) {
                Some(better) => latencies.push(better.timestamp() - r.timestamp()),
                None => unanswered += 1,
            }
        }
    }

    let mut previous = Phase::OnTrack;
    let mut escalation_count = 0;
    for r in records {
        if r.state.phase != Phase::Completed && r.state.phase.rank() > previous.rank() {
            escalation_count += 1;
        }
        previous = r.state.phase;
    }

    let mean = (!latencies.is_empty())
        .then(|| latencies.iter().sum::<u64>() as f64 / latencies.len() as f64);
    let median = (!latencies.is_empty()).then(|| {
        let mut sorted = latencies.clone();
        sorted.sort_unstable();
        let mid = sorted.len() / 2;
        if sorted.len().is_multiple_of(2) {
            (sorted[mid - 1] + sorted[mid]) as f64 / 2.0
        } else {
            sorted[mid] as f64
        }
    });

    Ok(MetricsReport {
        records: records.len(),
        duration_ms: last.timestamp() - first.timestamp(),
        on_track_fraction: on_track as f64 / records.len() as f64,
        cues,
        correction_latencies_ms: latencies,
        mean_correction_latency_ms: mean,
        median_correction_latency_ms: median,
        unanswered_cues: unanswered,
        completion_time_ms: completion_time,
        escalation_count,
        truncated: trace.header.truncated,
    })
}

fn opt_ms(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.0}"))
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "records              {}", self.records)?;
        writeln!(f, "duration_ms          {}", self.duration_ms)?;
        writeln!(f, "on_track_fraction    {:.3}", self.on_track_fraction)?;
        for cue in CueKind::ALL {
            writeln!(f, "cue {:<16} {}", format!("{cue:?}"), self.cues.get(cue))?;
        }
        writeln!(f, "mean_latency_ms      {}", opt_ms(self.mean_correction_latency_ms))?;
        writeln!(f, "median_latency_ms    {}", opt_ms(self.median_correction_latency_ms))?;
        writeln!(f, "unanswered_cues      {}", self.unanswered_cues)?;
        writeln!(
            f,
            "completion_time_ms   {}",
            self.completion_time_ms.map_or_else(|| "-".into(), |t| t.to_string())
        )?;
        writeln!(f, "escalation_count     {}", self.escalation_count)?;
        write!(f, "truncated            {}", self.truncated)
    }
}
