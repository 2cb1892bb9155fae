use crate::config::{EngineConfig, SeverityMode};
use crate::error::{Error, Result};
use crate::feedback::{step, FeedbackState, Observation, StepOutput};
use crate::geometry::{nearest_point, progress, LinePath, ScissorsPose};
use crate::sensing::{oracle_severity, sample_sensors, FaultInjector, SeverityEstimator};

use super::trace::TraceRecord;

/// Per-session chain from pose to feedback: geometry, sensors, fault
/// injection, severity, state machine. Everything a record contains is a
/// function of the poses fed so far, the configuration and the seed.
#[derive(Debug, Clone)]
pub struct Pipeline {
    path: LinePath<f64>,
    config: EngineConfig,
    injector: FaultInjector,
    estimator: SeverityEstimator,
    state: Option<FeedbackState>,
}

impl Pipeline {
    pub fn new(path: LinePath<f64>, config: EngineConfig, seed: u64) -> Result<Self> {
        config.validate_for(&path)?;
        Ok(Pipeline {
            injector: FaultInjector::new(config.faults, seed)?,
            estimator: SeverityEstimator::new(config.dwell),
            path,
            config,
            state: None,
        })
    }

    pub fn path(&self) -> &LinePath<f64> {
        &self.path
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn state(&self) -> Option<&FeedbackState> {
        self.state.as_ref()
    }

    pub fn tick(&mut self, pose: ScissorsPose<f64>) -> Result<TraceRecord> {
        let deviation = nearest_point(&pose, &self.path);
        let prog = progress(&deviation, &self.path);
        let clean = sample_sensors(&pose, &self.path, &self.config.mount);
        let reading = self.injector.apply(clean);
        self.feed(pose, reading, deviation, prog.fraction, prog.completed)
    }

    /// Like [`Pipeline::tick`] but with a reading that came from a device
    /// rather than the simulated mount. No faults are injected.
    pub fn tick_with_reading(
        &mut self,
        pose: ScissorsPose<f64>,
        reading: crate::sensing::SensorReading,
    ) -> Result<TraceRecord> {
        let deviation = nearest_point(&pose, &self.path);
        let prog = progress(&deviation, &self.path);
        self.feed(pose, reading, deviation, prog.fraction, prog.completed)
    }

    fn feed(
        &mut self,
        pose: ScissorsPose<f64>,
        reading: crate::sensing::SensorReading,
        deviation: crate::geometry::DeviationMeasure<f64>,
        fraction: f64,
        completed: bool,
    ) -> Result<TraceRecord> {
        if let Some(prev) = self.state.map(|s| s.clock) {
            if pose.timestamp <= prev {
                return Err(Error::NonIncreasingTimestamp {
                    timestamp: pose.timestamp,
                    previous: prev,
                });
            }
        }
        let estimate = self.estimator.update(&reading)?;
        let severity = match self.config.mode {
            SeverityMode::Sensor => estimate.severity,
            SeverityMode::Oracle => oracle_severity(&deviation, &self.config.thresholds)?,
        };
        let state = self.state.unwrap_or_else(|| FeedbackState::start(pose.timestamp));
        let StepOutput { state, frame, cues } = step(
            &state,
            &Observation {
                severity,
                completed,
                now: pose.timestamp,
                heading: pose.heading,
            },
            &self.config.feedback,
        )?;
        self.state = Some(state);
        Ok(TraceRecord {
            pose,
            reading,
            deviation,
            progress: fraction,
            severity,
            state,
            frame,
            cues,
        })
    }
}
