//! Chameleon feedback state machine.
//!
//! Maps a stream of severities to what the screen shows (chameleon colour,
//! side tint, end screen) and what the speaker says. Escalations take effect
//! on the step they are observed. De-escalations wait until the displayed
//! phase has been visible for its minimum duration; returning to on-track
//! additionally needs an unbroken calm streak of `de_escalation_hold`.
//!
//! Cues are edge-triggered: a warning plays once when its phase is entered.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensing::{Severity, SeverityLevel, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeedbackConfig {
    pub positive_cue_interval: u64,
    pub min_display_moderate: u64,
    pub min_display_severe: u64,
    pub de_escalation_hold: u64,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        FeedbackConfig {
            positive_cue_interval: 5000,
            min_display_moderate: 800,
            min_display_severe: 1500,
            de_escalation_hold: 300,
        }
    }
}

impl FeedbackConfig {
    pub fn validate(&self) -> Result<()> {
        for (field, value) in [
            ("feedback.positive_cue_interval", self.positive_cue_interval),
            ("feedback.min_display_moderate", self.min_display_moderate),
            ("feedback.min_display_severe", self.min_display_severe),
            ("feedback.de_escalation_hold", self.de_escalation_hold),
        ] {
            if value == 0 {
                return Err(Error::config(field, "must be > 0"));
            }
        }
        if self.min_display_severe < self.min_display_moderate {
            return Err(Error::config(
                "feedback.min_display_severe",
                "must be >= feedback.min_display_moderate",
            ));
        }
        Ok(())
    }

    /// Minimum time `phase` stays on screen before a milder phase may replace it.
    pub fn min_display(&self, phase: Phase) -> u64 {
        match phase {
            Phase::Moderate | Phase::Recovering => self.min_display_moderate,
            Phase::Severe => self.min_display_severe,
            Phase::OnTrack | Phase::Completed => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    OnTrack,
    Moderate,
    Severe,
    Recovering,
    Completed,
}

impl Phase {
    /// Display rank; higher is more alarming. Recovering shares Moderate's rank.
    pub fn rank(self) -> u8 {
        match self {
            Phase::OnTrack | Phase::Completed => 0,
            Phase::Moderate | Phase::Recovering => 1,
            Phase::Severe => 2,
        }
    }

    pub fn color(self) -> ChameleonColor {
        match self {
            Phase::OnTrack | Phase::Completed => ChameleonColor::Green,
            Phase::Moderate | Phase::Recovering => ChameleonColor::Orange,
            Phase::Severe => ChameleonColor::Red,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackState {
    pub phase: Phase,
    pub side: Side,
    pub phase_entered_at: u64,
    pub last_positive_cue_at: u64,
    /// Start of the current unbroken run of on-track input while off track.
    pub calm_since: Option<u64>,
    /// Clock value of the last step.
    pub clock: u64,
}

impl FeedbackState {
    /// Fresh on-track state at session start.
    pub fn start(now: u64) -> Self {
        FeedbackState {
            phase: Phase::OnTrack,
            side: Side::None,
            phase_entered_at: now,
            last_positive_cue_at: now,
            calm_since: None,
            clock: now,
        }
    }

    fn enter(&mut self, phase: Phase, side: Side, now: u64) {
        self.phase = phase;
        self.side = side;
        self.phase_entered_at = now;
        self.calm_since = None;
    }
}

impl Default for FeedbackState {
    fn default() -> Self {
        FeedbackState::start(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChameleonColor {
    Green,
    Orange,
    Red,
}

/// What the screen shows after a step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisualFrame {
    pub chameleon_color: ChameleonColor,
    /// Degrees, mirrors the scissors heading.
    pub chameleon_heading: f64,
    /// Tinted screen side, in the chameleon colour.
    pub side_tint: Side,
    pub dashed_line_visible: bool,
    pub end_screen: bool,
}

impl VisualFrame {
    pub fn for_state(state: &FeedbackState, heading: f64) -> Self {
        let end_screen = state.phase == Phase::Completed;
        VisualFrame {
            chameleon_color: state.phase.color(),
            chameleon_heading: heading,
            side_tint: state.side,
            dashed_line_visible: !end_screen,
            end_screen,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CueKind {
    KeepGoing,
    UhOh,
    WoahThere,
    GettingBetter,
    StayOnTrack,
    Fanfare,
}

impl CueKind {
    pub const ALL: [CueKind; 6] = [
        CueKind::KeepGoing,
        CueKind::UhOh,
        CueKind::WoahThere,
        CueKind::GettingBetter,
        CueKind::StayOnTrack,
        CueKind::Fanfare,
    ];

    /// Spoken / captioned text. The fanfare is music and has no words.
    pub fn text(self) -> &'static str {
        match self {
            CueKind::KeepGoing => "Good job \u{2013} keep going!",
            CueKind::UhOh => "Uh-oh!",
            CueKind::WoahThere => "Woah there!",
            CueKind::GettingBetter => "Getting better \u{2013} keep going!",
            CueKind::StayOnTrack => "Good job \u{2013} now stay on track!",
            CueKind::Fanfare => "",
        }
    }

    pub fn is_corrective(self) -> bool {
        matches!(self, CueKind::UhOh | CueKind::WoahThere)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudioCue {
    pub cue: CueKind,
    pub text: String,
}

impl From<CueKind> for AudioCue {
    fn from(cue: CueKind) -> Self {
        AudioCue {
            cue,
            text: cue.text().to_owned(),
        }
    }
}

/// One input to the machine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub severity: Severity,
    pub completed: bool,
    pub now: u64,
    /// Scissors heading, copied into the frame.
    #[serde(default)]
    pub heading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutput {
    pub state: FeedbackState,
    pub frame: VisualFrame,
    pub cues: Vec<CueKind>,
}

/// Advances the machine by one observation.
pub fn step(state: &FeedbackState, obs: &Observation, config: &FeedbackConfig) -> Result<StepOutput> {
    let mut next = *state;
    let mut cues = Vec::new();
    if state.phase == Phase::Completed {
        return Ok(StepOutput {
            state: next,
            frame: VisualFrame::for_state(&next, obs.heading),
            cues,
        });
    }
    let now = obs.now;
    if now < state.clock {
        return Err(Error::ClockRegression {
            now,
            previous: state.clock,
        });
    }
    next.clock = now;

    if obs.completed {
        next.enter(Phase::Completed, Side::None, now);
        cues.push(CueKind::Fanfare);
    } else {
        transition(&mut next, obs.severity, now, config, &mut cues);
    }
    Ok(StepOutput {
        state: next,
        frame: VisualFrame::for_state(&next, obs.heading),
        cues,
    })
}

fn transition(s: &mut FeedbackState, severity: Severity, now: u64, config: &FeedbackConfig, cues: &mut Vec<CueKind>) {
    let displayed_long_enough = now - s.phase_entered_at >= config.min_display(s.phase);

    if severity.level == SeverityLevel::OnTrack {
        if s.phase == Phase::OnTrack {
            if now - s.last_positive_cue_at >= config.positive_cue_interval {
                cues.push(CueKind::KeepGoing);
                s.last_positive_cue_at = now;
            }
            return;
        }
        let calm_since = *s.calm_since.get_or_insert(now);
        if displayed_long_enough && now - calm_since >= config.de_escalation_hold {
            // Severe -> OnTrack passes through Recovering silently
            s.enter(Phase::OnTrack, Side::None, now);
            s.last_positive_cue_at = now;
            cues.push(CueKind::StayOnTrack);
        }
        return;
    }

    s.calm_since = None;
    match (s.phase, severity.level) {
        (Phase::OnTrack, SeverityLevel::Moderate) => {
            s.enter(Phase::Moderate, severity.side, now);
            cues.push(CueKind::UhOh);
        }
        (Phase::OnTrack | Phase::Moderate | Phase::Recovering, SeverityLevel::Severe) => {
            s.enter(Phase::Severe, severity.side, now);
            cues.push(CueKind::WoahThere);
        }
        (Phase::Severe, SeverityLevel::Moderate) if displayed_long_enough => {
            s.enter(Phase::Recovering, severity.side, now);
            cues.push(CueKind::GettingBetter);
        }
        // same tier (or a milder one still inside the display window):
        // the tint follows the latest side, timers untouched
        (Phase::Moderate | Phase::Recovering, SeverityLevel::Moderate)
        | (Phase::Severe, SeverityLevel::Severe) => s.side = severity.side,
        (Phase::Severe, SeverityLevel::Moderate) => {}
        (Phase::Completed, _) | (_, SeverityLevel::OnTrack) => unreachable!("handled above"),
    }
}

/// One step of a session fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStep {
    pub now: u64,
    pub state: FeedbackState,
    pub frame: VisualFrame,
    pub cues: Vec<CueKind>,
}

/// Left fold of [`step`] over an observation stream whose timestamps must
/// strictly increase. The machine starts on track at the first timestamp.
pub fn run_session(observations: &[Observation], config: &FeedbackConfig) -> Result<Vec<SessionStep>> {
    config.validate()?;
    let Some(first) = observations.first() else {
        return Ok(Vec::new());
    };
    let mut state = FeedbackState::start(first.now);
    let mut out = Vec::with_capacity(observations.len());
    let mut previous: Option<u64> = None;
    for obs in observations {
        if let Some(prev) = previous {
            if obs.now <= prev {
                return Err(Error::NonIncreasingTimestamp {
                    timestamp: obs.now,
                    previous: prev,
                });
            }
        }
        previous = Some(obs.now);
        let StepOutput { state: next, frame, cues } = step(&state, obs, config)?;
        state = next;
        out.push(SessionStep {
            now: obs.now,
            state,
            frame,
            cues,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(severity: Severity, now: u64) -> Observation {
        Observation {
            severity,
            completed: false,
            now,
            heading: 0.0,
        }
    }

    fn cfg() -> FeedbackConfig {
        FeedbackConfig::default()
    }

    #[test]
    fn cue_strings_are_verbatim() {
        assert_eq!(CueKind::KeepGoing.text().as_bytes(), "Good job – keep going!".as_bytes());
        assert_eq!(CueKind::UhOh.text(), "Uh-oh!");
        assert_eq!(CueKind::WoahThere.text(), "Woah there!");
        assert_eq!(CueKind::GettingBetter.text(), "Getting better – keep going!");
        assert_eq!(CueKind::StayOnTrack.text(), "Good job – now stay on track!");
        assert!(CueKind::KeepGoing.text().contains('\u{2013}'));
    }

    #[test]
    fn moderate_from_on_track() {
        let out = step(&FeedbackState::start(0), &obs(Severity::moderate(Side::Left), 1000), &cfg()).unwrap();
        assert_eq!(out.state.phase, Phase::Moderate);
        assert_eq!(out.cues, vec![CueKind::UhOh]);
        assert_eq!(out.frame.chameleon_color, ChameleonColor::Orange);
        assert_eq!(out.frame.side_tint, Side::Left);
    }

    #[test]
    fn severe_to_recovering_after_display() {
        let mut s = FeedbackState::start(0);
        s.enter(Phase::Severe, Side::Left, 0);
        let early = step(&s, &obs(Severity::moderate(Side::Left), 1400), &cfg()).unwrap();
        assert_eq!(early.state.phase, Phase::Severe);
        assert!(early.cues.is_empty());
        let out = step(&s, &obs(Severity::moderate(Side::Left), 1600), &cfg()).unwrap();
        assert_eq!(out.state.phase, Phase::Recovering);
        assert_eq!(out.cues, vec![CueKind::GettingBetter]);
        assert_eq!(out.frame.chameleon_color, ChameleonColor::Orange);
    }

    #[test]
    fn completed_is_absorbing() {
        let mut s = FeedbackState::start(0);
        s.enter(Phase::Completed, Side::None, 10);
        for sev in [Severity::ON_TRACK, Severity::severe(Side::Right)] {
            let out = step(&s, &Observation { completed: true, ..obs(sev, 5) }, &cfg()).unwrap();
            assert_eq!(out.state, s);
            assert!(out.cues.is_empty());
            assert!(out.frame.end_screen);
        }
    }

    #[test]
    fn keep_going_boundary_is_inclusive() {
        let s = FeedbackState::start(0);
        let out = step(&s, &obs(Severity::ON_TRACK, 4999), &cfg()).unwrap();
        assert!(out.cues.is_empty());
        let out = step(&s, &obs(Severity::ON_TRACK, 5000), &cfg()).unwrap();
        assert_eq!(out.cues, vec![CueKind::KeepGoing]);
        assert_eq!(out.state.last_positive_cue_at, 5000);
    }

    #[test]
    fn clock_regression_is_an_error() {
        let s = FeedbackState::start(100);
        assert_eq!(
            step(&s, &obs(Severity::ON_TRACK, 50), &cfg()),
            Err(Error::ClockRegression { now: 50, previous: 100 })
        );
    }

    #[test]
    fn de_escalation_waits_for_hold() {
        let mut s = FeedbackState::start(0);
        s.enter(Phase::Moderate, Side::Right, 0);
        let mut t = 900;
        let out = step(&s, &obs(Severity::ON_TRACK, t), &cfg()).unwrap();
        assert_eq!(out.state.phase, Phase::Moderate);
        assert_eq!(out.state.calm_since, Some(900));
        s = out.state;
        t += 299;
        s = step(&s, &obs(Severity::ON_TRACK, t), &cfg()).unwrap().state;
        assert_eq!(s.phase, Phase::Moderate);
        let out = step(&s, &obs(Severity::ON_TRACK, 1200), &cfg()).unwrap();
        assert_eq!(out.state.phase, Phase::OnTrack);
        assert_eq!(out.cues, vec![CueKind::StayOnTrack]);
        assert_eq!(out.frame.chameleon_color, ChameleonColor::Green);
        assert_eq!(out.frame.side_tint, Side::None);
    }

    #[test]
    fn severe_to_on_track_emits_only_stay_on_track() {
        let mut s = FeedbackState::start(0);
        s.enter(Phase::Severe, Side::Left, 0);
        s = step(&s, &obs(Severity::ON_TRACK, 1300), &cfg()).unwrap().state;
        let out = step(&s, &obs(Severity::ON_TRACK, 1600), &cfg()).unwrap();
        assert_eq!(out.state.phase, Phase::OnTrack);
        assert_eq!(out.cues, vec![CueKind::StayOnTrack]);
    }

    #[test]
    fn empty_stream() {
        assert!(run_session(&[], &cfg()).unwrap().is_empty());
    }

    #[test]
    fn perfect_follower_twenty_seconds() {
        let mut stream: Vec<_> = (0..1000).map(|i| obs(Severity::ON_TRACK, i * 20)).collect();
        stream.push(Observation { completed: true, ..obs(Severity::ON_TRACK, 20_000) });
        let steps = run_session(&stream, &cfg()).unwrap();
        let cues: Vec<_> = steps
            .iter()
            .flat_map(|s| s.cues.iter().map(move |c| (s.now, *c)))
            .collect();
        assert_eq!(
            cues,
            vec![
                (5000, CueKind::KeepGoing),
                (10_000, CueKind::KeepGoing),
                (15_000, CueKind::KeepGoing),
                (20_000, CueKind::Fanfare)
            ]
        );
    }

    #[test]
    fn four_phrase_sequence() {
        let segments = [
            (Severity::moderate(Side::Left), 0..2000),
            (Severity::severe(Side::Left), 2000..4000),
            (Severity::moderate(Side::Left), 4000..6000),
            (Severity::ON_TRACK, 6000..8000),
        ];
        let stream: Vec<_> = segments
            .iter()
            .flat_map(|(sev, range)| range.clone().step_by(20).map(move |t| obs(*sev, 1000 + t)))
            .collect();
        let mut with_start = vec![obs(Severity::ON_TRACK, 0)];
        with_start.extend(stream);
        let cues: Vec<_> = run_session(&with_start, &cfg())
            .unwrap()
            .into_iter()
            .flat_map(|s| s.cues)
            .collect();
        assert_eq!(
            cues,
            vec![CueKind::UhOh, CueKind::WoahThere, CueKind::GettingBetter, CueKind::StayOnTrack]
        );
    }

    #[test]
    fn run_session_rejects_repeated_timestamps() {
        let stream = [obs(Severity::ON_TRACK, 0), obs(Severity::ON_TRACK, 0)];
        assert_eq!(
            run_session(&stream, &cfg()),
            Err(Error::NonIncreasingTimestamp { timestamp: 0, previous: 0 })
        );
    }

    #[test]
    fn config_ordering_enforced() {
        let c = FeedbackConfig {
            min_display_severe: 500,
            ..FeedbackConfig::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config { field, .. }) if field == "feedback.min_display_severe"));
        let c = FeedbackConfig {
            positive_cue_interval: 0,
            ..FeedbackConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
