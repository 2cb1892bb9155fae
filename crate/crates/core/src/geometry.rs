//! Planar cutting-line geometry.
//!
//! A [`LinePath`] is the printed line as a polyline with a uniform ink width.
//! All deviation quantities are measured against it: the signed lateral
//! offset of the cut point (positive = left of the direction of travel), the
//! heading deviation from the local tangent, and the arc-length position of
//! the nearest point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Narrowest printed line the two-sensor mount can detect, in millimetres.
pub const MIN_INK_WIDTH_MM: f64 = 7.0;

/// A point or vector in paper coordinates (mm). Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[T; 2]", into = "[T; 2]")]
pub struct Point2<T: Scalar> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> From<[T; 2]> for Point2<T> {
    fn from([x, y]: [T; 2]) -> Self {
        Point2 { x, y }
    }
}

impl<T: Scalar> From<Point2<T>> for [T; 2] {
    fn from(p: Point2<T>) -> Self {
        [p.x, p.y]
    }
}

#[allow(clippy::should_implement_trait)]
impl<T: Scalar> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Point2 { x, y }
    }

    /// Unit vector pointing along `heading_deg` (counter-clockwise from +x).
    pub fn from_heading(heading_deg: T) -> Self {
        let rad = heading_deg.to_radians();
        Point2::new(rad.cos(), rad.sin())
    }

    pub fn add(self, other: Self) -> Self {
        Point2::new(self.x + other.x, self.y + other.y)
    }

    pub fn sub(self, other: Self) -> Self {
        Point2::new(self.x - other.x, self.y - other.y)
    }

    pub fn scale(self, k: T) -> Self {
        Point2::new(self.x * k, self.y * k)
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product; positive when `other` lies to the
    /// left of `self`.
    pub fn cross(self, other: Self) -> T {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Self) -> T {
        self.sub(other).norm()
    }

    /// Left-hand normal (rotated +90°).
    pub fn perp(self) -> Self {
        Point2::new(-self.y, self.x)
    }

    /// Heading of this vector in degrees, in (-180, 180].
    pub fn heading_deg(self) -> T {
        self.y.atan2(self.x).to_degrees()
    }
}

/// Wraps an angle in degrees into (-180, 180].
pub fn wrap_degrees<T: Scalar>(angle: T) -> T {
    let full = T::lit(360.0);
    let half = T::lit(180.0);
    let mut r = angle % full;
    if r <= -half {
        r = r + full;
    } else if r > half {
        r = r - full;
    }
    r
}

/// Normalizes a heading in degrees into [0, 360).
pub fn normalize_heading<T: Scalar>(heading: T) -> T {
    let full = T::lit(360.0);
    let mut r = heading % full;
    if r < T::zero() {
        r = r + full;
    }
    // `-tiny % 360 + 360` rounds to exactly 360
    if r >= full {
        r = r - full;
    }
    r
}

/// On-disk representation of a path (`*.path.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathFile<T: Scalar> {
    pub vertices: Vec<[T; 2]>,
    pub ink_width_mm: T,
    pub capture_radius_mm: T,
}

/// The printed cutting line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PathFile<T>", into = "PathFile<T>")]
pub struct LinePath<T: Scalar> {
    vertices: Vec<Point2<T>>,
    ink_width: T,
    capture_radius: T,
    /// Arc length at the start of each vertex; `cumulative[0] == 0`.
    cumulative: Vec<T>,
}

impl<T: Scalar> TryFrom<PathFile<T>> for LinePath<T> {
    type Error = Error;

    fn try_from(file: PathFile<T>) -> Result<Self> {
        LinePath::new(
            file.vertices.into_iter().map(Point2::from).collect(),
            file.ink_width_mm,
            file.capture_radius_mm,
        )
    }
}

impl<T: Scalar> From<LinePath<T>> for PathFile<T> {
    fn from(path: LinePath<T>) -> Self {
        PathFile {
            vertices: path.vertices.iter().map(|&p| p.into()).collect(),
            ink_width_mm: path.ink_width,
            capture_radius_mm: path.capture_radius,
        }
    }
}

/// Nearest point of a polyline to a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection<T: Scalar> {
    pub point: Point2<T>,
    pub segment: usize,
    /// Arc length from the path start to `point`.
    pub arc_position: T,
    pub distance: T,
}

impl<T: Scalar> LinePath<T> {
    pub fn new(vertices: Vec<Point2<T>>, ink_width: T, capture_radius: T) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InvalidPath(format!(
                "need at least 2 vertices, got {}",
                vertices.len()
            )));
        }
        if let Some(i) = vertices
            .iter()
            .position(|p| !p.x.is_finite() || !p.y.is_finite())
        {
            return Err(Error::InvalidPath(format!("vertex {i} is not finite")));
        }
        // NaN fails this comparison too
        if !(ink_width >= T::lit(MIN_INK_WIDTH_MM)) || !ink_width.is_finite() {
            return Err(Error::InkTooNarrow {
                width: ink_width.as_f64(),
                floor: MIN_INK_WIDTH_MM,
            });
        }
        if !(capture_radius >= T::zero()) || !capture_radius.is_finite() {
            return Err(Error::InvalidPath(format!(
                "capture_radius must be a finite non-negative length, got {}",
                capture_radius.as_f64()
            )));
        }
        let mut cumulative = Vec::with_capacity(vertices.len());
        cumulative.push(T::zero());
        for (i, w) in vertices.windows(2).enumerate() {
            let len = w[0].distance(w[1]);
            if !(len > T::zero()) {
                return Err(Error::InvalidPath(format!(
                    "vertices {i} and {} coincide",
                    i + 1
                )));
            }
            let prev = cumulative[i];
            cumulative.push(prev + len);
        }
        Ok(LinePath {
            vertices,
            ink_width,
            capture_radius,
            cumulative,
        })
    }

    /// Convenience constructor from `(x, y)` pairs.
    pub fn from_xy(points: &[(T, T)], ink_width: T, capture_radius: T) -> Result<Self> {
        Self::new(
            points.iter().map(|&(x, y)| Point2::new(x, y)).collect(),
            ink_width,
            capture_radius,
        )
    }

    pub fn vertices(&self) -> &[Point2<T>] {
        &self.vertices
    }

    pub fn ink_width(&self) -> T {
        self.ink_width
    }

    pub fn capture_radius(&self) -> T {
        self.capture_radius
    }

    pub fn segment_count(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn total_length(&self) -> T {
        self.cumulative[self.cumulative.len() - 1]
    }

    pub fn segment(&self, index: usize) -> (Point2<T>, Point2<T>) {
        (self.vertices[index], self.vertices[index + 1])
    }

    pub fn segment_length(&self, index: usize) -> T {
        self.cumulative[index + 1] - self.cumulative[index]
    }

    /// Unit tangent of segment `index`.
    pub fn tangent(&self, index: usize) -> Point2<T> {
        let (a, b) = self.segment(index);
        b.sub(a).scale(T::one() / self.segment_length(index))
    }

    /// Point and segment index at arc length `s` (clamped to the path).
    pub fn point_at(&self, s: T) -> (Point2<T>, usize) {
        let s = s.max(T::zero()).min(self.total_length());
        // first segment whose end lies at or beyond s
        let seg = self
            .cumulative
            .iter()
            .skip(1)
            .position(|&c| c >= s)
            .unwrap_or(self.segment_count() - 1);
        let t = s - self.cumulative[seg];
        (self.vertices[seg].add(self.tangent(seg).scale(t)), seg)
    }

    /// Projection of `p` onto segment `index`: (point, distance along segment).
    pub fn project_onto_segment(&self, p: Point2<T>, index: usize) -> (Point2<T>, T) {
        let (a, _) = self.segment(index);
        let dir = self.tangent(index);
        let t = p.sub(a).dot(dir).max(T::zero()).min(self.segment_length(index));
        (a.add(dir.scale(t)), t)
    }

    /// Distance from `p` to segment `index`.
    pub fn segment_distance(&self, p: Point2<T>, index: usize) -> T {
        self.project_onto_segment(p, index).0.distance(p)
    }

    /// Globally nearest point of the polyline; ties go to the lowest segment index.
    pub fn project(&self, p: Point2<T>) -> Projection<T> {
        let mut best: Option<(usize, Point2<T>, T, T)> = None;
        for i in 0..self.segment_count() {
            let (q, t) = self.project_onto_segment(p, i);
            let d2 = q.sub(p).dot(q.sub(p));
            if best.is_none_or(|(_, _, _, bd2)| d2 < bd2) {
                best = Some((i, q, t, d2));
            }
        }
        let (segment, point, t, d2) = best.expect("path has at least one segment");
        Projection {
            point,
            segment,
            arc_position: self.cumulative[segment] + t,
            distance: d2.sqrt(),
        }
    }

    /// Distance from `p` to the path centreline.
    pub fn distance_to(&self, p: Point2<T>) -> T {
        (0..self.segment_count())
            .map(|i| self.segment_distance(p, i))
            .fold(T::infinity(), T::min)
    }

    /// True when `p` lies on the inked stripe.
    pub fn is_inked(&self, p: Point2<T>) -> bool {
        self.distance_to(p) <= self.ink_width / T::lit(2.0)
    }

    /// Applies a point map to every vertex, keeping widths. Used for rigid
    /// transforms and reflections.
    pub fn map_vertices(&self, f: impl Fn(Point2<T>) -> Point2<T>) -> Result<Self> {
        LinePath::new(
            self.vertices.iter().map(|&p| f(p)).collect(),
            self.ink_width,
            self.capture_radius,
        )
    }
}

/// Cut-point position, scissors heading and timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScissorsPose<T: Scalar> {
    pub position: Point2<T>,
    /// Degrees counter-clockwise from +x, in [0, 360).
    pub heading: T,
    /// Milliseconds since session start.
    pub timestamp: u64,
}

impl<T: Scalar> ScissorsPose<T> {
    pub fn new(position: Point2<T>, heading: T, timestamp: u64) -> Self {
        ScissorsPose {
            position,
            heading: normalize_heading(heading),
            timestamp,
        }
    }

    pub fn at(x: T, y: T, heading: T, timestamp: u64) -> Self {
        Self::new(Point2::new(x, y), heading, timestamp)
    }
}

/// Ground-truth deviation of a pose from the line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationMeasure<T: Scalar> {
    /// Signed distance to the nearest point; positive = left of travel.
    pub lateral_offset: T,
    /// Pose heading minus tangent heading, in (-180, 180].
    pub heading_deviation: T,
    pub arc_position: T,
    pub nearest_segment: usize,
}

/// Measures `pose` against `path` using a global nearest-point search.
///
/// The sign of the offset comes from the side of the nearest segment's
/// tangent the pose lies on; a pose exactly on the tangent axis beyond an
/// endpoint counts as left.
pub fn nearest_point<T: Scalar>(pose: &ScissorsPose<T>, path: &LinePath<T>) -> DeviationMeasure<T> {
    let proj = path.project(pose.position);
    let tangent = path.tangent(proj.segment);
    let side = tangent.cross(pose.position.sub(proj.point));
    let lateral_offset = if side < T::zero() {
        -proj.distance
    } else {
        proj.distance
    };
    DeviationMeasure {
        lateral_offset,
        heading_deviation: wrap_degrees(pose.heading - tangent.heading_deg()),
        arc_position: proj.arc_position,
        nearest_segment: proj.segment,
    }
}

/// Fraction of the path covered and whether the end has been reached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Progress<T: Scalar> {
    pub fraction: T,
    pub completed: bool,
}

/// Progress along the path. Completion requires being within one capture
/// radius of the end both along and across the line.
pub fn progress<T: Scalar>(measure: &DeviationMeasure<T>, path: &LinePath<T>) -> Progress<T> {
    let total = path.total_length();
    let fraction = (measure.arc_position / total).max(T::zero()).min(T::one());
    let eps = path.capture_radius() / total;
    Progress {
        fraction,
        completed: fraction >= T::one() - eps && measure.lateral_offset.abs() <= path.capture_radius(),
    }
}
