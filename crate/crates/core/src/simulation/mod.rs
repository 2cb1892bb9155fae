//! Headless sessions: synthetic cutters, trace recording, golden replay and
//! metrics.

mod behavior;
mod metrics;
mod pipeline;
mod replay;
mod trace;

pub use behavior::{run_behavior, CutterBehaviorModel, ResponseMode, TICK_MS};
pub use metrics::{metrics, MetricsReport};
pub use pipeline::Pipeline;
pub use replay::{replay, verify_replay};
pub use trace::{config_hash, ReadingSource, SessionTrace, TraceHeader, TraceRecord, TRACE_FORMAT, TRACE_VERSION};
