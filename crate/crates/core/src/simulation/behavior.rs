use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::feedback::{ChameleonColor, CueKind, Phase};
use crate::geometry::{LinePath, ScissorsPose};

use super::pipeline::Pipeline;
use super::trace::{SessionTrace, TraceHeader};

/// Simulation step, ms. Matches the default 50 Hz sensor rate.
pub const TICK_MS: u64 = 20;

/// Which feedback channel the simulated learner reacts to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseMode {
    /// Reacts once the coloured screen has been seen.
    Visual,
    /// Reacts once a warning cue has been heard.
    Audio,
    /// Whichever channel gets through first.
    #[default]
    Earliest,
}

/// Kinematic stand-in for a learner cutting along the line.
///
/// The intended cut point advances along the path at `advance_speed` while a
/// lateral offset integrates a steering rate: `drift_rate`, minus
/// `correction_gain` times the offset once corrective feedback is perceived.
/// Perception follows the reaction delay of the channel the feedback arrived
/// on, and steering effort ramps between zero and one over
/// `correction_ramp_ms`. The steering rate is limited to `max_steer_deg` of
/// slip, and the scissors point along the steered direction. A sinusoidal
/// hand sway shifts the position sideways without turning the blades.
///
/// This is a kinematic model for producing plausible closed-loop traces, not
/// a model of children's motor control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CutterBehaviorModel {
    /// mm/s along the path.
    pub advance_speed: f64,
    /// Signed lateral bias, mm/s, positive toward the left of travel.
    pub drift_rate: f64,
    pub tremor_amplitude: f64,
    pub tremor_frequency: f64,
    /// 1/s.
    pub correction_gain: f64,
    /// Largest steering angle away from the tangent, degrees.
    pub max_steer_deg: f64,
    pub correction_ramp_ms: u64,
    pub reaction_delay_visual: u64,
    pub reaction_delay_audio: u64,
    pub response: ResponseMode,
}

impl Default for CutterBehaviorModel {
    fn default() -> Self {
        CutterBehaviorModel {
            advance_speed: 20.0,
            drift_rate: 1.5,
            tremor_amplitude: 0.8,
            tremor_frequency: 1.3,
            correction_gain: 2.5,
            max_steer_deg: 20.0,
            correction_ramp_ms: 200,
            reaction_delay_visual: 350,
            reaction_delay_audio: 550,
            response: ResponseMode::Earliest,
        }
    }
}

impl CutterBehaviorModel {
    pub fn validate(&self) -> Result<()> {
        let finite_non_negative = |field: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("behavior.{field}"), "must be finite and >= 0"))
            }
        };
        finite_non_negative("advance_speed", self.advance_speed)?;
        finite_non_negative("tremor_amplitude", self.tremor_amplitude)?;
        finite_non_negative("tremor_frequency", self.tremor_frequency)?;
        finite_non_negative("correction_gain", self.correction_gain)?;
        if !(self.max_steer_deg > 0.0 && self.max_steer_deg < 90.0) {
            return Err(Error::config("behavior.max_steer_deg", "must be in (0, 90)"));
        }
        if !self.drift_rate.is_finite() {
            return Err(Error::config("behavior.drift_rate", "must be finite"));
        }
        Ok(())
    }

    /// A learner that never leaves the line.
    pub fn perfect(advance_speed: f64) -> Self {
        CutterBehaviorModel {
            advance_speed,
            drift_rate: 0.0,
            tremor_amplitude: 0.0,
            correction_gain: 0.0,
            ..Self::default()
        }
    }

    fn reaction_delay(&self, channel: ResponseMode) -> u64 {
        match channel {
            ResponseMode::Visual => self.reaction_delay_visual,
            ResponseMode::Audio => self.reaction_delay_audio,
            ResponseMode::Earliest => self.reaction_delay_visual.min(self.reaction_delay_audio),
        }
    }
}

/// What the learner has seen and heard so far.
#[derive(Debug, Default)]
struct Perception {
    /// Chameleon colour per tick.
    colors: Vec<ChameleonColor>,
    /// (time, corrective?) of every non-fanfare cue.
    cues: Vec<(u64, bool)>,
}

impl Perception {
    fn sees_warning(&self, now: u64, delay: u64) -> bool {
        now.checked_sub(delay)
            .and_then(|t| self.colors.get((t / TICK_MS) as usize))
            .is_some_and(|&c| c != ChameleonColor::Green)
    }

    fn heard_warning(&self, now: u64, delay: u64) -> bool {
        let Some(horizon) = now.checked_sub(delay) else {
            return false;
        };
        self.cues
            .iter()
            .rev()
            .find(|(t, _)| *t <= horizon)
            .is_some_and(|&(_, corrective)| corrective)
    }

    fn corrective(&self, model: &CutterBehaviorModel, now: u64) -> bool {
        let visual = || self.sees_warning(now, model.reaction_delay(ResponseMode::Visual));
        let audio = || self.heard_warning(now, model.reaction_delay(ResponseMode::Audio));
        match model.response {
            ResponseMode::Visual => visual(),
            ResponseMode::Audio => audio(),
            ResponseMode::Earliest => visual() || audio(),
        }
    }
}

/// Runs a closed-loop session of `config.behavior` on `path`.
///
/// The run ends on completion or at `config.max_duration_ms`, in which case
/// the header is flagged truncated. Seeds select the tremor phase and the
/// fault stream.
pub fn run_behavior(path: &LinePath<f64>, config: &EngineConfig, seed: u64) -> Result<SessionTrace> {
    let model = config.behavior;
    let mut pipeline = Pipeline::new(path.clone(), config.clone(), seed)?;
    let mut header = TraceHeader::new("simulate", path, config, seed);

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x005E_ED0F_7E11);
    let tremor_phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let omega = std::f64::consts::TAU * model.tremor_frequency;
    let dt = TICK_MS as f64 / 1000.0;
    let max_rate = model.advance_speed * model.max_steer_deg.to_radians().tan();
    let ramp_per_tick = if model.correction_ramp_ms == 0 {
        1.0
    } else {
        TICK_MS as f64 / model.correction_ramp_ms as f64
    };

    let mut perception = Perception::default();
    let mut records = Vec::new();
    let mut drift_offset = 0.0_f64;
    let mut effort = 0.0_f64;
    let mut t: u64 = 0;
    loop {
        let secs = t as f64 / 1000.0;
        let tremor = model.tremor_amplitude * (omega * secs + tremor_phase).sin();
        let lateral = drift_offset + tremor;
        let steer_rate = (model.drift_rate - effort * model.correction_gain * lateral).clamp(-max_rate, max_rate);

        let s = model.advance_speed * secs;
        let (on_line, segment) = path.point_at(s);
        let tangent = path.tangent(segment);
        let position = on_line.add(tangent.perp().scale(lateral));
        let slip = if model.advance_speed > 0.0 {
            steer_rate.atan2(model.advance_speed).to_degrees()
        } else {
            0.0
        };
        let pose = ScissorsPose::new(position, tangent.heading_deg() + slip, t);

        let record = pipeline.tick(pose)?;
        perception.colors.push(record.frame.chameleon_color);
        perception.cues.extend(
            record
                .cues
                .iter()
                .filter(|c| **c != CueKind::Fanfare)
                .map(|c| (t, c.is_corrective())),
        );
        let done = record.state.phase == Phase::Completed;
        records.push(record);
        if done {
            break;
        }
        if t + TICK_MS > config.max_duration_ms {
            header.truncated = true;
            break;
        }

        let target = if perception.corrective(&model, t) { 1.0 } else { 0.0 };
        effort += (target - effort).clamp(-ramp_per_tick, ramp_per_tick);
        drift_offset += dt * steer_rate;
        t += TICK_MS;
    }
    header.end_time_ms = t;
    Ok(SessionTrace { header, records })
}
