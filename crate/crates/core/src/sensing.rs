//! Two-sensor mount simulation and severity estimation.
//!
//! The mount straddles the line: when the cut point is centred both sensor
//! spots sit on blank paper. Ink under exactly one sensor means the cut point
//! has drifted toward the opposite side.
//!
//! Two binary sensors cannot measure a deviation angle, so the severe tier is
//! realized from timing instead: a contact that lasts the escalation dwell, or
//! a line that is lost after such a contact, reads as severe.
//! [`oracle_severity`] classifies the true pose-space deviation and serves as
//! ground truth in tests and as the alternative severity source.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DeviationMeasure, LinePath, Point2, ScissorsPose};
use crate::scalar::Scalar;

/// Geometry of the sensor pair relative to the cut point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorMountConfig<T: Scalar> {
    /// Centre-to-centre lateral distance between the two spots, mm.
    pub sensor_spacing: T,
    pub sensor_spot_diameter: T,
    /// Distance of the sensor pair ahead of the cut point along the heading, mm.
    pub forward_offset: T,
    pub sample_rate: T,
}

impl<T: Scalar> Default for SensorMountConfig<T> {
    fn default() -> Self {
        SensorMountConfig {
            sensor_spacing: T::lit(24.0),
            sensor_spot_diameter: T::lit(3.0),
            forward_offset: T::lit(15.0),
            sample_rate: T::lit(50.0),
        }
    }
}

impl<T: Scalar> SensorMountConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: T| v > T::zero() && v.is_finite();
        if !positive(self.sensor_spacing) {
            return Err(Error::config("mount.sensor_spacing", "must be > 0"));
        }
        if !positive(self.sensor_spot_diameter) {
            return Err(Error::config("mount.sensor_spot_diameter", "must be > 0"));
        }
        if !(self.forward_offset >= T::zero()) || !self.forward_offset.is_finite() {
            return Err(Error::config("mount.forward_offset", "must be >= 0"));
        }
        if !positive(self.sample_rate) {
            return Err(Error::config("mount.sample_rate", "must be > 0"));
        }
        Ok(())
    }

    /// Checks the straddle condition against a concrete path.
    pub fn validate_for(&self, path: &LinePath<T>) -> Result<()> {
        self.validate()?;
        if !(self.sensor_spacing > path.ink_width()) {
            return Err(Error::config(
                "mount.sensor_spacing",
                format!(
                    "{} mm does not straddle a {} mm line",
                    self.sensor_spacing.as_f64(),
                    path.ink_width().as_f64()
                ),
            ));
        }
        Ok(())
    }

    /// Sampling period in whole milliseconds.
    pub fn sample_period_ms(&self) -> u64 {
        (T::lit(1000.0) / self.sample_rate).round().as_f64().max(1.0) as u64
    }
}

/// One of the two physical sensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sensor {
    Left,
    Right,
}

/// Side of the line the cut point has drifted toward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Side {
    #[default]
    None,
    Left,
    Right,
}

impl Side {
    pub fn flipped(self) -> Side {
        match self {
            Side::None => Side::None,
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

impl Sensor {
    /// Ink under this sensor means the cut point drifted to the other side.
    pub fn drift_side(self) -> Side {
        match self {
            Sensor::Left => Side::Right,
            Sensor::Right => Side::Left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SeverityLevel {
    OnTrack,
    Moderate,
    Severe,
}

/// Deviation tier and direction. `side` is `None` exactly when on track.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Severity {
    pub level: SeverityLevel,
    pub side: Side,
}

impl Severity {
    pub const ON_TRACK: Severity = Severity {
        level: SeverityLevel::OnTrack,
        side: Side::None,
    };

    /// Builds a severity, forcing `side` to `None` on track. An off-track
    /// level with no side is rejected.
    pub fn new(level: SeverityLevel, side: Side) -> Option<Severity> {
        match (level, side) {
            (SeverityLevel::OnTrack, _) => Some(Self::ON_TRACK),
            (_, Side::None) => None,
            (level, side) => Some(Severity { level, side }),
        }
    }

    pub fn moderate(side: Side) -> Severity {
        Self::new(SeverityLevel::Moderate, side).expect("moderate needs a side")
    }

    pub fn severe(side: Side) -> Severity {
        Self::new(SeverityLevel::Severe, side).expect("severe needs a side")
    }

    pub fn is_valid(&self) -> bool {
        (self.level == SeverityLevel::OnTrack) == (self.side == Side::None)
    }
}

/// A timestamped pair of binary sensor outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct SensorReading {
    pub timestamp: u64,
    pub left_on_ink: bool,
    pub right_on_ink: bool,
    /// A faulted channel's `on_ink` value carries no information.
    pub left_fault: bool,
    pub right_fault: bool,
}

impl SensorReading {
    /// On-ink values with faulted channels forced clear.
    pub fn effective(&self) -> (bool, bool) {
        (
            self.left_on_ink && !self.left_fault,
            self.right_on_ink && !self.right_fault,
        )
    }
}

/// World positions of the (left, right) spot centres for a pose.
pub fn sensor_positions<T: Scalar>(
    pose: &ScissorsPose<T>,
    mount: &SensorMountConfig<T>,
) -> (Point2<T>, Point2<T>) {
    let ahead = Point2::from_heading(pose.heading);
    let centre = pose.position.add(ahead.scale(mount.forward_offset));
    let half = ahead.perp().scale(mount.sensor_spacing / T::lit(2.0));
    (centre.add(half), centre.sub(half))
}

/// Area of a radius-`r` disc lying at or below height `y` (relative to its centre).
fn disc_area_below<T: Scalar>(y: T, r: T) -> T {
    let full = T::PI() * r * r;
    if y <= -r {
        T::zero()
    } else if y >= r {
        full
    } else {
        let cap = r * r * (y / r).acos() - y * (r * r - y * y).sqrt();
        full - cap
    }
}

// Ring/spoke counts for the fallback quadrature; every node carries equal area.
const QUAD_RINGS: usize = 40;
const QUAD_SPOKES: usize = 80;

/// Fraction of the disc (`centre`, `radius`) covered by the inked stripe, the
/// polyline dilated by half the ink width.
///
/// Away from vertices and path ends the stripe is locally a straight band and
/// the overlap is computed in closed form; elsewhere a fixed equal-area polar
/// quadrature is used.
pub fn spot_ink_fraction<T: Scalar>(centre: Point2<T>, radius: T, path: &LinePath<T>) -> T {
    let half_width = path.ink_width() / T::lit(2.0);
    let reach = radius + half_width;
    let mut near = (0..path.segment_count()).filter(|&i| path.segment_distance(centre, i) < reach);
    let first = match near.next() {
        None => return T::zero(),
        Some(i) => i,
    };
    if near.next().is_none() {
        let (a, _) = path.segment(first);
        let dir = path.tangent(first);
        let along = centre.sub(a).dot(dir);
        if along - radius >= T::zero() && along + radius <= path.segment_length(first) {
            let d = dir.cross(centre.sub(a));
            let covered = disc_area_below(half_width - d, radius)
                - disc_area_below(-half_width - d, radius);
            return (covered / (T::PI() * radius * radius)).max(T::zero()).min(T::one());
        }
    }
    quadrature_fraction(centre, radius, path)
}

fn quadrature_fraction<T: Scalar>(centre: Point2<T>, radius: T, path: &LinePath<T>) -> T {
    let mut hits = 0usize;
    for ring in 0..QUAD_RINGS {
        let rho = radius * T::lit(((ring as f64 + 0.5) / QUAD_RINGS as f64).sqrt());
        for spoke in 0..QUAD_SPOKES {
            // stagger alternate rings to avoid radial alignment with the stripe
            let theta = T::lit(
                std::f64::consts::TAU * (spoke as f64 + 0.5 * (ring % 2) as f64) / QUAD_SPOKES as f64,
            );
            let p = centre.add(Point2::new(theta.cos(), theta.sin()).scale(rho));
            if path.is_inked(p) {
                hits += 1;
            }
        }
    }
    T::lit(hits as f64 / (QUAD_RINGS * QUAD_SPOKES) as f64)
}

/// Minimum covered fraction for a spot to read as on ink. A spot centred on
/// the ink edge (exactly half covered) fires.
pub const ON_INK_FRACTION: f64 = 0.5;
const FRACTION_TOLERANCE: f64 = 1e-9;

fn fires<T: Scalar>(fraction: T) -> bool {
    fraction >= T::lit(ON_INK_FRACTION - FRACTION_TOLERANCE)
}

/// Noise-free sensor reading for a pose. Fault flags are always clear.
pub fn sample_sensors<T: Scalar>(
    pose: &ScissorsPose<T>,
    path: &LinePath<T>,
    mount: &SensorMountConfig<T>,
) -> SensorReading {
    let (left, right) = sensor_positions(pose, mount);
    let radius = mount.sensor_spot_diameter / T::lit(2.0);
    SensorReading {
        timestamp: pose.timestamp,
        left_on_ink: fires(spot_ink_fraction(left, radius, path)),
        right_on_ink: fires(spot_ink_fraction(right, radius, path)),
        left_fault: false,
        right_fault: false,
    }
}

/// Per-sample fault probabilities and stuck-at persistence.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FaultModel {
    pub left_probability: f64,
    pub right_probability: f64,
    /// How long a triggered fault persists, ms. Zero faults only the
    /// triggering sample.
    pub stuck_dwell_ms: u64,
}

impl FaultModel {
    pub fn uniform(probability: f64, stuck_dwell_ms: u64) -> Self {
        FaultModel {
            left_probability: probability,
            right_probability: probability,
            stuck_dwell_ms,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, p) in [
            ("faults.left_probability", self.left_probability),
            ("faults.right_probability", self.right_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(field, format!("probability {p} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn is_inert(&self) -> bool {
        self.left_probability == 0.0 && self.right_probability == 0.0
    }
}

/// Seeded fault injector. The output stream is a function of the input stream
/// and the seed alone.
#[derive(Debug, Clone)]
pub struct FaultInjector {
    model: FaultModel,
    rng: ChaCha8Rng,
    stuck_until: [Option<u64>; 2],
}

impl FaultInjector {
    pub fn new(model: FaultModel, seed: u64) -> Result<Self> {
        model.validate()?;
        Ok(FaultInjector {
            model,
            rng: ChaCha8Rng::seed_from_u64(seed),
            stuck_until: [None, None],
        })
    }

    pub fn model(&self) -> &FaultModel {
        &self.model
    }

    /// Sets fault flags on `reading`. Both channels draw from the generator on
    /// every sample so the stream position never depends on earlier outcomes.
    pub fn apply(&mut self, mut reading: SensorReading) -> SensorReading {
        let t = reading.timestamp;
        let probabilities = [self.model.left_probability, self.model.right_probability];
        let mut faulted = [false; 2];
        for channel in 0..2 {
            let draw: f64 = self.rng.gen();
            let stuck = self.stuck_until[channel].is_some_and(|until| t < until);
            if stuck {
                faulted[channel] = true;
            } else if draw < probabilities[channel] {
                faulted[channel] = true;
                self.stuck_until[channel] = Some(t + self.model.stuck_dwell_ms);
            } else {
                self.stuck_until[channel] = None;
            }
        }
        reading.left_fault |= faulted[0];
        reading.right_fault |= faulted[1];
        reading
    }
}

/// Timing parameters of the sensor-side estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DwellConfig {
    /// Continuous single-sensor contact this long escalates to severe, ms.
    pub escalation_ms: u64,
}

impl Default for DwellConfig {
    fn default() -> Self {
        DwellConfig { escalation_ms: 400 }
    }
}

impl DwellConfig {
    pub fn validate(&self) -> Result<()> {
        if self.escalation_ms == 0 {
            return Err(Error::config("dwell.escalation_ms", "must be > 0"));
        }
        Ok(())
    }
}

/// Estimator output: the severity plus the fault flags it ignored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeverityEstimate {
    pub severity: Severity,
    pub left_fault: bool,
    pub right_fault: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Contact {
    sensor: Sensor,
    since: u64,
    /// The line came back in from outside the sensor span.
    from_outside: bool,
    escalated: bool,
}

/// Streaming form of [`estimate_severity`].
///
/// Contact runs that start from a centred line escalate after the dwell. A
/// run that escalated and then lost the line is read as the line escaping
/// outside the span: severe persists until ink is seen again. When the line
/// re-enters from outside the learner is correcting, so that run stays
/// moderate. A run that clears before escalating is read as re-centering;
/// binary sensors cannot tell a late correction from an escape, so a learner
/// who corrects after escalation keeps reading severe until the next contact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeverityEstimator {
    dwell: DwellConfig,
    contact: Option<Contact>,
    escaped: Option<Side>,
    last_timestamp: Option<u64>,
}

impl SeverityEstimator {
    pub fn new(dwell: DwellConfig) -> Self {
        SeverityEstimator {
            dwell,
            contact: None,
            escaped: None,
            last_timestamp: None,
        }
    }

    pub fn update(&mut self, reading: &SensorReading) -> Result<SeverityEstimate> {
        let t = reading.timestamp;
        if self.last_timestamp.is_some_and(|prev| t < prev) {
            return Err(Error::HistoryOutOfOrder { timestamp: t });
        }
        self.last_timestamp = Some(t);

        let severity = match reading.effective() {
            (true, false) => self.touch(Sensor::Left, t),
            (false, true) => self.touch(Sensor::Right, t),
            (false, false) => {
                if let Some(c) = self.contact.take() {
                    self.escaped = (c.escalated && !c.from_outside).then(|| c.sensor.drift_side());
                }
                match self.escaped {
                    Some(side) => Severity::severe(side),
                    None => Severity::ON_TRACK,
                }
            }
            // ink under both spots: crossing a perpendicular stretch of line
            (true, true) => {
                self.contact = None;
                self.escaped = None;
                Severity::ON_TRACK
            }
        };
        Ok(SeverityEstimate {
            severity,
            left_fault: reading.left_fault,
            right_fault: reading.right_fault,
        })
    }

    fn touch(&mut self, sensor: Sensor, t: u64) -> Severity {
        let side = sensor.drift_side();
        let contact = match self.contact {
            Some(c) if c.sensor == sensor => c,
            _ => Contact {
                sensor,
                since: t,
                from_outside: self.escaped == Some(side),
                escalated: false,
            },
        };
        self.escaped = None;
        let escalated =
            contact.escalated || (!contact.from_outside && t - contact.since >= self.dwell.escalation_ms);
        self.contact = Some(Contact { escalated, ..contact });
        if escalated {
            Severity::severe(side)
        } else {
            Severity::moderate(side)
        }
    }
}

/// Classifies the trailing sensor history. Equivalent to folding a fresh
/// [`SeverityEstimator`] over `history` and keeping the last output.
pub fn estimate_severity(history: &[SensorReading], dwell: DwellConfig) -> Result<SeverityEstimate> {
    let mut estimator = SeverityEstimator::new(dwell);
    let mut last = Err(Error::EmptyHistory);
    for reading in history {
        last = Ok(estimator.update(reading)?);
    }
    last
}

/// Pose-space severity thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleThresholds<T: Scalar> {
    pub moderate_offset: T,
    pub severe_offset: T,
    pub moderate_angle: T,
    pub severe_angle: T,
}

impl<T: Scalar> Default for OracleThresholds<T> {
    fn default() -> Self {
        OracleThresholds {
            moderate_offset: T::lit(6.0),
            severe_offset: T::lit(14.0),
            moderate_angle: T::lit(10.0),
            severe_angle: T::lit(25.0),
        }
    }
}

impl<T: Scalar> OracleThresholds<T> {
    /// Offset thresholds placed where the mount physically responds: moderate
    /// where the line first reaches a spot centre, severe where it leaves the
    /// far side. Angle thresholds keep their defaults.
    pub fn matched_to_mount(mount: &SensorMountConfig<T>, ink_width: T) -> Self {
        let two = T::lit(2.0);
        OracleThresholds {
            moderate_offset: (mount.sensor_spacing - ink_width) / two,
            severe_offset: (mount.sensor_spacing + ink_width) / two,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.moderate_offset > T::zero()) {
            return Err(Error::config("thresholds.moderate_offset", "must be > 0"));
        }
        if !(self.moderate_angle > T::zero()) {
            return Err(Error::config("thresholds.moderate_angle", "must be > 0"));
        }
        if !(self.moderate_offset < self.severe_offset) {
            return Err(Error::config(
                "thresholds.severe_offset",
                "must exceed thresholds.moderate_offset",
            ));
        }
        if !(self.moderate_angle < self.severe_angle) {
            return Err(Error::config(
                "thresholds.severe_angle",
                "must exceed thresholds.moderate_angle",
            ));
        }
        Ok(())
    }
}

/// Ground-truth severity of a deviation. Thresholds are inclusive. The side
/// follows the offset when the offset alone reaches the moderate threshold,
/// otherwise the heading.
pub fn oracle_severity<T: Scalar>(
    measure: &DeviationMeasure<T>,
    thresholds: &OracleThresholds<T>,
) -> Result<Severity> {
    thresholds.validate()?;
    let offset = measure.lateral_offset.abs();
    let angle = measure.heading_deviation.abs();
    let level = if offset >= thresholds.severe_offset || angle >= thresholds.severe_angle {
        SeverityLevel::Severe
    } else if offset >= thresholds.moderate_offset || angle >= thresholds.moderate_angle {
        SeverityLevel::Moderate
    } else {
        return Ok(Severity::ON_TRACK);
    };
    let signed = if offset >= thresholds.moderate_offset {
        measure.lateral_offset
    } else {
        measure.heading_deviation
    };
    let side = if signed > T::zero() { Side::Left } else { Side::Right };
    Ok(Severity { level, side })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(width: f64) -> LinePath<f64> {
        LinePath::from_xy(&[(0.0, 0.0), (200.0, 0.0)], width, 5.0).unwrap()
    }

    fn reading(t: u64, left: bool, right: bool) -> SensorReading {
        SensorReading {
            timestamp: t,
            left_on_ink: left,
            right_on_ink: right,
            ..Default::default()
        }
    }

    /// Monte-Carlo area estimate of the inked fraction of a disc.
    fn monte_carlo_fraction(centre: Point2<f64>, radius: f64, path: &LinePath<f64>, n: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut inside = 0usize;
        let mut hits = 0usize;
        while inside < n {
            let x: f64 = rng.gen_range(-radius..radius);
            let y: f64 = rng.gen_range(-radius..radius);
            if x * x + y * y > radius * radius {
                continue;
            }
            inside += 1;
            if path.is_inked(centre.add(Point2::new(x, y))) {
                hits += 1;
            }
        }
        hits as f64 / n as f64
    }

    #[test]
    fn centred_pose_reads_clear() {
        let r = sample_sensors(&ScissorsPose::at(50.0, 0.0, 0.0, 0), &line(8.0), &SensorMountConfig::default());
        assert!(!r.left_on_ink && !r.right_on_ink);
    }

    #[test]
    fn left_offset_puts_ink_under_right_sensor() {
        let path = line(8.0);
        let mount = SensorMountConfig::default();
        let pose = ScissorsPose::<f64>::at(50.0, 8.0, 0.0, 0);
        let (_, right) = sensor_positions(&pose, &mount);
        assert!((right.y + 4.0).abs() < 1e-12);

        // spot centred on the ink edge: half covered
        let mc = monte_carlo_fraction(right, 1.5, &path, 100_000);
        let analytic = spot_ink_fraction(right, 1.5, &path);
        assert!((mc - 0.5).abs() < 0.01, "monte carlo {mc}");
        assert!((analytic - mc).abs() < 0.01);

        let r = sample_sensors(&pose, &path, &mount);
        assert!(r.right_on_ink);
        assert!(!r.left_on_ink);
    }

    #[test]
    fn analytic_overlap_matches_monte_carlo() {
        let path = line(8.0);
        for &(y, radius) in &[(0.0, 1.5), (3.0, 1.5), (4.7, 1.5), (-5.2, 1.5), (2.0, 6.0), (-6.5, 4.0)] {
            let c = Point2::new(100.0, y);
            let analytic = spot_ink_fraction(c, radius, &path);
            let mc = monte_carlo_fraction(c, radius, &path, 100_000);
            assert!((analytic - mc).abs() < 0.01, "y={y} r={radius}: {analytic} vs {mc}");
        }
    }

    #[test]
    fn quadrature_near_corner_matches_monte_carlo() {
        let path = LinePath::from_xy(&[(0.0, 0.0), (50.0, 0.0), (50.0, 50.0)], 8.0, 5.0).unwrap();
        for &(x, y) in &[(50.0, 0.0), (53.5, -3.0), (46.0, 4.5), (54.0, 1.0), (-3.0, 1.0)] {
            let c = Point2::new(x, y);
            let q = spot_ink_fraction(c, 1.5, &path);
            let mc = monte_carlo_fraction(c, 1.5, &path, 100_000);
            assert!((q - mc).abs() < 0.01, "({x},{y}): {q} vs {mc}");
        }
    }

    #[test]
    fn wide_line_rejected_before_sampling() {
        assert!(LinePath::from_xy(&[(0.0, 0.0), (10.0, 0.0)], 5.0, 1.0).is_err());
        let path = line(30.0);
        assert!(SensorMountConfig::default().validate_for(&path).is_err());
        assert!(SensorMountConfig::default().validate_for(&line(8.0)).is_ok());
    }

    #[test]
    fn heading_moves_sensors() {
        let mount = SensorMountConfig::<f64>::default();
        let (l, r) = sensor_positions(&ScissorsPose::at(0.0, 0.0, 90.0, 0), &mount);
        assert!((l.x + 12.0).abs() < 1e-9 && (l.y - 15.0).abs() < 1e-9);
        assert!((r.x - 12.0).abs() < 1e-9 && (r.y - 15.0).abs() < 1e-9);
    }

    #[test]
    fn fault_probability_zero_is_identity() {
        let mut inj = FaultInjector::new(FaultModel::uniform(0.0, 100), 42).unwrap();
        for t in 0..1000 {
            let r = reading(t * 20, t % 3 == 0, t % 5 == 0);
            assert_eq!(inj.apply(r), r);
        }
    }

    #[test]
    fn fault_probability_one_faults_everything() {
        let mut inj = FaultInjector::new(FaultModel::uniform(1.0, 0), 42).unwrap();
        for t in 0..1000 {
            let r = inj.apply(reading(t * 20, false, true));
            assert!(r.left_fault && r.right_fault);
        }
    }

    #[test]
    fn fault_rate_converges() {
        let mut inj = FaultInjector::new(FaultModel::uniform(0.1, 0), 42).unwrap();
        let n = 10_000;
        let mut faults = 0;
        for t in 0..n {
            let r = inj.apply(reading(t * 20, false, false));
            faults += r.left_fault as usize + r.right_fault as usize;
        }
        let rate = faults as f64 / (2 * n) as f64;
        assert!((rate - 0.1).abs() <= 0.01, "rate {rate}");
    }

    #[test]
    fn stuck_faults_persist_for_dwell() {
        let model = FaultModel {
            left_probability: 1.0,
            right_probability: 0.0,
            stuck_dwell_ms: 100,
        };
        let mut inj = FaultInjector::new(model, 1).unwrap();
        assert!(inj.apply(reading(0, false, false)).left_fault);
        let model = FaultModel { left_probability: 0.0, ..model };
        // swap in a zero-probability model but keep the stuck state
        inj.model = model;
        assert!(inj.apply(reading(60, false, false)).left_fault);
        assert!(!inj.apply(reading(100, false, false)).left_fault);
    }

    #[test]
    fn faults_are_seed_deterministic() {
        let run = |seed| {
            let mut inj = FaultInjector::new(FaultModel::uniform(0.3, 40), seed).unwrap();
            (0..500).map(|t| inj.apply(reading(t * 20, true, false))).collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }

    #[test]
    fn invalid_fault_probability() {
        let err = FaultInjector::new(FaultModel::uniform(1.5, 0), 0).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "faults.left_probability"));
        assert!(FaultModel::uniform(-0.1, 0).validate().is_err());
        assert!(FaultModel::uniform(f64::NAN, 0).validate().is_err());
    }

    #[test]
    fn empty_history_has_no_estimate() {
        assert_eq!(estimate_severity(&[], DwellConfig::default()), Err(Error::EmptyHistory));
    }

    #[test]
    fn all_clear_is_on_track() {
        let h: Vec<_> = (0..10).map(|i| reading(i * 20, false, false)).collect();
        assert_eq!(estimate_severity(&h, DwellConfig::default()).unwrap().severity, Severity::ON_TRACK);
    }

    #[test]
    fn brief_left_contact_is_moderate_right() {
        let mut h = vec![reading(0, false, false)];
        h.extend((1..=3).map(|i| reading(i * 25, true, false))); // on ink 25..=75, i.e. 50 ms
        let e = estimate_severity(&h, DwellConfig { escalation_ms: 400 }).unwrap();
        assert_eq!(e.severity, Severity::moderate(Side::Right));
    }

    #[test]
    fn long_left_contact_escalates() {
        let mut h = vec![reading(0, false, false)];
        h.extend((0..=18).map(|i| reading(50 + i * 25, true, false))); // 50..=500: 450 ms
        let e = estimate_severity(&h, DwellConfig { escalation_ms: 400 }).unwrap();
        assert_eq!(e.severity, Severity::severe(Side::Right));
        // one sample short of the dwell stays moderate
        let e = estimate_severity(&h[..16], DwellConfig { escalation_ms: 400 }).unwrap();
        assert_eq!(e.severity, Severity::moderate(Side::Right));
    }

    #[test]
    fn escape_then_return_then_recentre() {
        let dwell = DwellConfig { escalation_ms: 100 };
        let mut est = SeverityEstimator::new(dwell);
        let mut t = 0;
        let mut feed = |l: bool, r: bool, n: usize| {
            let mut out = Severity::ON_TRACK;
            for _ in 0..n {
                out = est.update(&reading(t, l, r)).unwrap().severity;
                t += 20;
            }
            out
        };
        assert_eq!(feed(false, false, 3), Severity::ON_TRACK);
        assert_eq!(feed(false, true, 2), Severity::moderate(Side::Left));
        assert_eq!(feed(false, true, 5), Severity::severe(Side::Left));
        // line lost beyond the right sensor
        assert_eq!(feed(false, false, 20), Severity::severe(Side::Left));
        // coming back in: moderate, no dwell escalation while recovering
        assert_eq!(feed(false, true, 30), Severity::moderate(Side::Left));
        assert_eq!(feed(false, false, 1), Severity::ON_TRACK);
    }

    #[test]
    fn short_contact_that_clears_is_recentred() {
        let mut h = vec![reading(0, false, false)];
        h.extend((1..=5).map(|i| reading(i * 20, false, true)));
        h.push(reading(120, false, false));
        let e = estimate_severity(&h, DwellConfig::default()).unwrap();
        assert_eq!(e.severity, Severity::ON_TRACK);
    }

    #[test]
    fn faulted_channel_is_treated_clear_and_reported() {
        let mut r = reading(0, true, false);
        r.left_fault = true;
        let e = estimate_severity(&[r], DwellConfig::default()).unwrap();
        assert_eq!(e.severity, Severity::ON_TRACK);
        assert!(e.left_fault && !e.right_fault);
    }

    #[test]
    fn out_of_order_history_rejected() {
        let h = [reading(100, false, false), reading(80, false, false)];
        assert_eq!(
            estimate_severity(&h, DwellConfig::default()),
            Err(Error::HistoryOutOfOrder { timestamp: 80 })
        );
    }

    fn measure(offset: f64, angle: f64) -> DeviationMeasure<f64> {
        DeviationMeasure {
            lateral_offset: offset,
            heading_deviation: angle,
            arc_position: 0.0,
            nearest_segment: 0,
        }
    }

    #[test]
    fn oracle_defaults() {
        let th = OracleThresholds::default();
        assert_eq!(oracle_severity(&measure(0.0, 0.0), &th).unwrap(), Severity::ON_TRACK);
        assert_eq!(oracle_severity(&measure(8.0, 5.0), &th).unwrap(), Severity::moderate(Side::Left));
        assert_eq!(oracle_severity(&measure(8.0, 30.0), &th).unwrap(), Severity::severe(Side::Left));
        assert_eq!(oracle_severity(&measure(-14.0, 0.0), &th).unwrap(), Severity::severe(Side::Right));
        // angle-only deviation takes its side from the heading
        assert_eq!(oracle_severity(&measure(2.0, -12.0), &th).unwrap(), Severity::moderate(Side::Right));
    }

    #[test]
    fn oracle_rejects_non_monotone_thresholds() {
        let th = OracleThresholds {
            moderate_offset: 10.0,
            severe_offset: 5.0,
            ..OracleThresholds::default()
        };
        assert!(matches!(oracle_severity(&measure(0.0, 0.0), &th), Err(Error::Config { .. })));
        let th = OracleThresholds {
            moderate_angle: 30.0,
            ..OracleThresholds::default()
        };
        assert!(th.validate().is_err());
    }

    #[test]
    fn matched_thresholds_follow_mount() {
        let th = OracleThresholds::matched_to_mount(&SensorMountConfig::default(), 8.0);
        assert_eq!(th.moderate_offset, 8.0);
        assert_eq!(th.severe_offset, 16.0);
    }

    #[test]
    fn severity_side_invariant() {
        assert_eq!(Severity::new(SeverityLevel::OnTrack, Side::Left), Some(Severity::ON_TRACK));
        assert_eq!(Severity::new(SeverityLevel::Severe, Side::None), None);
    }
}
