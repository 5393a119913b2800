//! Parametric coil geometry.
//!
//! Every coil is reduced to a centerline [`WirePath`]: an ordered 3D polyline
//! carrying unit current. Trace width and foil thickness live in
//! [`Conductor`] and only enter the resistance and self-inductance
//! regularization downstream.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Segments shorter than this are treated as repeated vertices.
pub const MIN_SEGMENT_M: f64 = 1e-9;

/// Default quadrature discretization for downstream field and inductance sums.
pub const DEFAULT_MAX_SEGMENT_M: f64 = 1e-3;

/// An open path may stand in for a circuit loop when the straight feed
/// between its terminals is at most this fraction of its arc length.
pub const MAX_TERMINAL_GAP_FRACTION: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("path needs at least 2 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("vertex {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("segment {0} is degenerate (length below {MIN_SEGMENT_M} m)")]
    DegenerateSegment(usize),
    #[error("invalid {kind} spec: {reason}")]
    InvalidSpec { kind: &'static str, reason: String },
    #[error("path spans {extent_m:.4} m across the bend axis, more than the cylinder circumference {circumference_m:.4} m")]
    BendSelfIntersection { extent_m: f64, circumference_m: f64 },
    #[error("invalid bend: {0}")]
    InvalidBend(String),
    #[error("open path terminals are {gap_m:.4} m apart ({fraction:.3} of arc length); no circuit loop is defined")]
    DistantTerminals { gap_m: f64, fraction: f64 },
    #[error("max segment length must be positive and finite, got {0}")]
    InvalidMaxSegment(f64),
}

fn invalid(kind: &'static str, reason: impl Into<String>) -> GeometryError {
    GeometryError::InvalidSpec {
        kind,
        reason: reason.into(),
    }
}

/// A point (or displacement) in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 3]> for Point3 {
    fn from(v: [f64; 3]) -> Self {
        Point3::new(v[0], v[1], v[2])
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        [p.x, p.y, p.z]
    }
}

impl Point3 {
    pub const ZERO: Point3 = Point3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    #[inline]
    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Point3) -> Point3 {
        Point3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn distance(self, o: Point3) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Unit vector in the same direction; `None` for the zero vector.
    pub fn normalized(self) -> Option<Point3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }
}

impl Add for Point3 {
    type Output = Point3;
    #[inline]
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Point3 {
    #[inline]
    fn add_assign(&mut self, o: Point3) {
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
    }
}

impl Sub for Point3 {
    type Output = Point3;
    #[inline]
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    #[inline]
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    #[inline]
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

/// Shortest distance from `p` to the segment `a`–`b`.
pub fn point_segment_distance(p: Point3, a: Point3, b: Point3) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// Shortest distance between segments `p0`–`p1` and `q0`–`q1`.
pub fn segment_segment_distance(p0: Point3, p1: Point3, q0: Point3, q1: Point3) -> f64 {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.norm_sq();
    let e = d2.norm_sq();
    let f = d2.dot(r);
    let c = d1.dot(r);
    let b = d1.dot(d2);
    let denom = a * e - b * b;

    let mut s = if denom > 1e-300 * a * e {
        ((b * f - c * e) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    (p0 + d1 * s).distance(q0 + d2 * t)
}

/// Ordered polyline carrying unit current from the first vertex to the last.
///
/// A closed path has an implicit segment from the last vertex back to the first.
#[derive(Debug, Clone, PartialEq)]
pub struct WirePath {
    vertices: Vec<Point3>,
    closed: bool,
}

impl WirePath {
    pub fn new(vertices: Vec<Point3>, closed: bool) -> Result<Self, GeometryError> {
        if vertices.len() < 2 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite(i));
        }
        let path = WirePath { vertices, closed };
        if let Some(i) = path
            .segments()
            .position(|(a, b)| a.distance(b) <= MIN_SEGMENT_M)
        {
            return Err(GeometryError::DegenerateSegment(i));
        }
        Ok(path)
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn segment_count(&self) -> usize {
        if self.closed {
            self.vertices.len()
        } else {
            self.vertices.len() - 1
        }
    }

    /// Segments as `(start, end)` pairs in current-flow order, including the
    /// closing segment of a closed path.
    pub fn segments(&self) -> impl Iterator<Item = (Point3, Point3)> + '_ {
        let n = self.segment_count();
        let v = &self.vertices;
        (0..n).map(move |i| (v[i], v[(i + 1) % v.len()]))
    }

    pub fn arc_length(&self) -> f64 {
        self.segments().map(|(a, b)| a.distance(b)).sum()
    }

    pub fn first(&self) -> Point3 {
        self.vertices[0]
    }

    pub fn last(&self) -> Point3 {
        self.vertices[self.vertices.len() - 1]
    }

    /// Straight-line distance between the terminals; zero for closed paths.
    pub fn terminal_gap(&self) -> f64 {
        if self.closed {
            0.0
        } else {
            self.first().distance(self.last())
        }
    }

    /// The circuit this path belongs to: closed paths as-is, open paths with
    /// adjacent terminals closed by a straight feed between them.
    pub fn to_circuit_loop(&self) -> Result<WirePath, GeometryError> {
        if self.closed {
            return Ok(self.clone());
        }
        let gap = self.terminal_gap();
        let fraction = gap / self.arc_length();
        if fraction > MAX_TERMINAL_GAP_FRACTION {
            return Err(GeometryError::DistantTerminals { gap_m: gap, fraction });
        }
        if gap <= MIN_SEGMENT_M {
            let mut vertices = self.vertices.clone();
            vertices.pop();
            return WirePath::new(vertices, true);
        }
        WirePath::new(self.vertices.clone(), true)
    }

    /// Same conductor with the current direction reversed.
    pub fn reversed(&self) -> WirePath {
        let mut vertices = self.vertices.clone();
        vertices.reverse();
        WirePath {
            vertices,
            closed: self.closed,
        }
    }

    pub fn translated(&self, offset: Point3) -> WirePath {
        WirePath {
            vertices: self.vertices.iter().map(|&v| v + offset).collect(),
            closed: self.closed,
        }
    }

    pub fn scaled(&self, factor: f64) -> WirePath {
        WirePath {
            vertices: self.vertices.iter().map(|&v| v * factor).collect(),
            closed: self.closed,
        }
    }

    /// Axis-aligned bounds as `(min, max)`.
    pub fn bounding_box(&self) -> (Point3, Point3) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices[1..] {
            lo = Point3::new(lo.x.min(v.x), lo.y.min(v.y), lo.z.min(v.z));
            hi = Point3::new(hi.x.max(v.x), hi.y.max(v.y), hi.z.max(v.z));
        }
        (lo, hi)
    }

    /// Minimum distance from `p` to any segment, with the index of that segment.
    pub fn nearest_segment(&self, p: Point3) -> (usize, f64) {
        self.segments()
            .enumerate()
            .map(|(i, (a, b))| (i, point_segment_distance(p, a, b)))
            .fold((0, f64::INFINITY), |best, cur| {
                if cur.1 < best.1 {
                    cur
                } else {
                    best
                }
            })
    }

    /// Plain-text `x,y,z` table, one vertex per line, meters.
    pub fn to_xyz_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# wire path, {} vertices", self.vertices.len());
        let _ = writeln!(out, "# closed={}", self.closed);
        let _ = writeln!(out, "# x,y,z [m]");
        for v in &self.vertices {
            let _ = writeln!(out, "{},{},{}", v.x, v.y, v.z);
        }
        out
    }

    /// Parses the table written by [`WirePath::to_xyz_table`].
    pub fn from_xyz_table(text: &str) -> Result<WirePath, GeometryError> {
        let mut closed = false;
        let mut vertices = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(comment) = line.strip_prefix('#') {
                if comment.trim() == "closed=true" {
                    closed = true;
                }
                continue;
            }
            let coords: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| invalid("xyz table", format!("line {line:?}: {e}")))?;
            if coords.len() != 3 {
                return Err(invalid("xyz table", format!("line {line:?}: expected 3 columns")));
            }
            vertices.push(Point3::new(coords[0], coords[1], coords[2]));
        }
        WirePath::new(vertices, closed)
    }
}

/// Serpentine footprint. Long traces run along x, stacked along y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanderSpec {
    pub width_m: f64,
    pub height_m: f64,
    pub pitch_m: f64,
    pub trace_width_m: f64,
    /// Double-track serpentine wiring. Mechanical only; the centerline is unchanged.
    #[serde(default)]
    pub double_track: bool,
}

impl MeanderSpec {
    /// Number of long traces: as many as fit at `pitch`, rounded down to an
    /// even count so both terminals sit on the feed edge.
    pub fn trace_count(&self) -> usize {
        let fit = (self.height_m / self.pitch_m + 1e-9).floor() as usize;
        fit - fit % 2
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let MeanderSpec {
            width_m,
            height_m,
            pitch_m,
            trace_width_m,
            ..
        } = *self;
        if ![width_m, height_m, pitch_m, trace_width_m]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(invalid("meander", "non-finite dimension"));
        }
        if trace_width_m <= 0.0 {
            return Err(invalid("meander", "trace width must be positive"));
        }
        if pitch_m <= trace_width_m {
            return Err(invalid("meander", "pitch must exceed trace width"));
        }
        if width_m <= pitch_m || height_m <= pitch_m {
            return Err(invalid("meander", "footprint must exceed the pitch in both directions"));
        }
        if self.trace_count() < 2 {
            return Err(invalid("meander", "footprint holds fewer than 2 traces"));
        }
        Ok(())
    }
}

/// Open serpentine centered on the origin in the z=0 plane.
///
/// Trace `i` runs along x at `y_i`, direction alternating with `i`; both
/// terminals lie on the `x = -width/2` edge.
pub fn gen_meander(spec: &MeanderSpec) -> Result<WirePath, GeometryError> {
    spec.validate()?;
    let n = spec.trace_count();
    let half_w = spec.width_m / 2.0;
    let y0 = -(n as f64 - 1.0) * spec.pitch_m / 2.0;
    let mut vertices = Vec::with_capacity(2 * n);
    for i in 0..n {
        let y = y0 + i as f64 * spec.pitch_m;
        let (from, to) = if i % 2 == 0 {
            (-half_w, half_w)
        } else {
            (half_w, -half_w)
        };
        vertices.push(Point3::new(from, y, 0.0));
        vertices.push(Point3::new(to, y, 0.0));
    }
    WirePath::new(vertices, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpiralSpec {
    pub outer_width_m: f64,
    pub outer_height_m: f64,
    pub turns: u32,
    pub pitch_m: f64,
    pub trace_width_m: f64,
}

impl SpiralSpec {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.turns == 0 {
            return Err(invalid("spiral", "turns must be positive"));
        }
        let dims = [
            self.outer_width_m,
            self.outer_height_m,
            self.pitch_m,
            self.trace_width_m,
        ];
        if !dims.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(invalid("spiral", "dimensions must be positive and finite"));
        }
        let min_side = self.outer_width_m.min(self.outer_height_m);
        if self.turns as f64 * self.pitch_m >= min_side / 2.0 {
            return Err(invalid(
                "spiral",
                format!(
                    "{} turns at pitch {} m do not fit in {} m",
                    self.turns, self.pitch_m, min_side
                ),
            ));
        }
        Ok(())
    }
}

/// Rectangular spiral centered on the origin in the z=0 plane, winding
/// counter-clockwise and inward by `pitch` per turn.
///
/// Turn `k` traces the rectangle inset by `k * pitch`; the left side of each
/// turn stops one pitch short and steps inward, so each full turn has the
/// inset rectangle's perimeter. The path ends one pitch above the last turn's
/// start (the lead gap).
pub fn gen_spiral(spec: &SpiralSpec) -> Result<WirePath, GeometryError> {
    spec.validate()?;
    let (hw, hh, p) = (
        spec.outer_width_m / 2.0,
        spec.outer_height_m / 2.0,
        spec.pitch_m,
    );
    let mut vertices = Vec::with_capacity(5 * spec.turns as usize);
    for k in 0..spec.turns {
        let inset = k as f64 * p;
        let (x0, x1, y0, y1) = (-hw + inset, hw - inset, -hh + inset, hh - inset);
        vertices.push(Point3::new(x0, y0, 0.0));
        vertices.push(Point3::new(x1, y0, 0.0));
        vertices.push(Point3::new(x1, y1, 0.0));
        vertices.push(Point3::new(x0, y1, 0.0));
        vertices.push(Point3::new(x0, y0 + p, 0.0));
    }
    WirePath::new(vertices, false)
}

/// Ring coil wound on a cylinder of the ring's inner diameter, in a plane tilted
/// away from the finger cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngledCoilSpec {
    pub diameter_m: f64,
    pub turns: u32,
    pub tilt_rad: f64,
    pub trace_width_m: f64,
}

impl AngledCoilSpec {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.turns == 0 {
            return Err(invalid("angled ring", "turns must be positive"));
        }
        if !(self.diameter_m.is_finite() && self.diameter_m > 0.0) {
            return Err(invalid("angled ring", "diameter must be positive"));
        }
        if !(self.trace_width_m.is_finite() && self.trace_width_m > 0.0) {
            return Err(invalid("angled ring", "trace width must be positive"));
        }
        if !(0.0..PI / 2.0).contains(&self.tilt_rad) {
            return Err(invalid("angled ring", "tilt must lie in [0, pi/2)"));
        }
        Ok(())
    }
}

const RING_VERTICES_PER_TURN: usize = 256;

/// Helical polyline around the z (finger) axis centered on the origin.
///
/// Each turn is the intersection of the cylinder `x² + y² = (d/2)²` with the
/// plane `z = tan(tilt)·x`, an ellipse with axes `d/2` and `d/(2 cos tilt)`
/// in its own plane. Successive turns rise by one trace width along z.
pub fn gen_angled_ring_coil(spec: &AngledCoilSpec) -> Result<WirePath, GeometryError> {
    spec.validate()?;
    let r = spec.diameter_m / 2.0;
    let slope = spec.tilt_rad.tan();
    let steps = RING_VERTICES_PER_TURN * spec.turns as usize;
    let vertices = (0..=steps)
        .map(|i| {
            let phi = 2.0 * PI * i as f64 / RING_VERTICES_PER_TURN as f64;
            let rise = spec.trace_width_m * phi / (2.0 * PI);
            let (s, c) = phi.sin_cos();
            Point3::new(r * c, r * s, r * slope * c + rise)
        })
        .collect();
    WirePath::new(vertices, false)
}

/// Tangent line and orientation for [`apply_cylinder_bend`].
///
/// The cylinder touches the flat surface along the line through `origin`
/// with direction `axis`; its center line lies a radius below `origin` along
/// `-normal`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BendAxis {
    pub origin: Point3,
    pub axis: Point3,
    pub normal: Point3,
}

impl Default for BendAxis {
    /// Bend about a line parallel to x through the origin, surface facing +z.
    fn default() -> Self {
        BendAxis {
            origin: Point3::ZERO,
            axis: Point3::new(1.0, 0.0, 0.0),
            normal: Point3::new(0.0, 0.0, 1.0),
        }
    }
}

/// Longest arc a single bent segment may span before it is subdivided.
pub const BEND_MAX_ARC_STEP_M: f64 = 1e-3;

/// Wraps `path` onto a cylinder of `radius`.
///
/// Coordinates along the axis are kept, the in-plane coordinate across the
/// axis becomes arc length on the cylinder, and height above the surface
/// becomes radial offset. Vertices keep their along-surface coordinates, so
/// trace spacing measured on the surface is unchanged. Segments crossing the
/// axis direction are first split into arcs of at most
/// [`BEND_MAX_ARC_STEP_M`]; each chord then undershoots its arc by at most
/// `(step / radius)² / 24` relative.
pub fn apply_cylinder_bend(
    path: &WirePath,
    radius: f64,
    axis: &BendAxis,
) -> Result<WirePath, GeometryError> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(GeometryError::InvalidBend(format!(
            "radius must be positive and finite, got {radius}"
        )));
    }
    let a = axis
        .axis
        .normalized()
        .ok_or_else(|| GeometryError::InvalidBend("zero axis direction".into()))?;
    let n0 = axis.normal - a * axis.normal.dot(a);
    let n = n0
        .normalized()
        .ok_or_else(|| GeometryError::InvalidBend("normal parallel to axis".into()))?;
    let w = n.cross(a);

    let to_local = |p: Point3| {
        let d = p - axis.origin;
        (d.dot(a), d.dot(w), d.dot(n))
    };
    let mut local: Vec<(f64, f64, f64)> = Vec::with_capacity(path.vertices().len());
    for (start, end) in path.segments() {
        let (p, q) = (to_local(start), to_local(end));
        let pieces = ((q.1 - p.1).abs() / BEND_MAX_ARC_STEP_M * (1.0 - 1e-12))
            .ceil()
            .max(1.0) as usize;
        local.push(p);
        for k in 1..pieces {
            let f = k as f64 / pieces as f64;
            local.push((p.0 + (q.0 - p.0) * f, p.1 + (q.1 - p.1) * f, p.2 + (q.2 - p.2) * f));
        }
    }
    if !path.is_closed() {
        local.push(to_local(path.last()));
    }
    let (s_min, s_max) = local
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, s, _)| {
            (lo.min(s), hi.max(s))
        });
    let circumference = 2.0 * PI * radius;
    if s_max - s_min > circumference {
        return Err(GeometryError::BendSelfIntersection {
            extent_m: s_max - s_min,
            circumference_m: circumference,
        });
    }
    if let Some(&(_, _, h)) = local.iter().find(|&&(_, _, h)| radius + h <= 0.0) {
        return Err(GeometryError::InvalidBend(format!(
            "vertex {h} m below the surface lies inside the cylinder axis"
        )));
    }

    let vertices = local
        .into_iter()
        .map(|(t, s, h)| {
            let theta = s / radius;
            let rho = radius + h;
            let (sin, cos) = theta.sin_cos();
            axis.origin + a * t + w * (rho * sin) + n * (rho * cos - radius)
        })
        .collect();
    WirePath::new(vertices, path.is_closed())
}

/// Subdivides every segment into equal pieces no longer than `max_segment`.
/// Input vertices are kept.
pub fn discretize(path: &WirePath, max_segment: f64) -> Result<WirePath, GeometryError> {
    if !(max_segment.is_finite() && max_segment > 0.0) {
        return Err(GeometryError::InvalidMaxSegment(max_segment));
    }
    let mut vertices = Vec::with_capacity(path.vertices().len());
    for (a, b) in path.segments() {
        // Tolerance keeps already-subdivided pieces from splitting again.
        let pieces = ((a.distance(b) / max_segment) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        vertices.push(a);
        for k in 1..pieces {
            let t = k as f64 / pieces as f64;
            vertices.push(a + (b - a) * t);
        }
    }
    if !path.is_closed() {
        vertices.push(path.last());
    }
    WirePath::new(vertices, path.is_closed())
}

/// Conductor cross-section and material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Conductor {
    pub resistivity_ohm_m: f64,
    pub foil_thickness_m: f64,
    pub trace_width_m: f64,
    #[serde(default = "unit_permeability")]
    pub relative_permeability: f64,
}

fn unit_permeability() -> f64 {
    1.0
}

impl Conductor {
    pub const COPPER_RESISTIVITY_OHM_M: f64 = 1.68e-8;

    /// Copper foil of the given width and thickness.
    pub fn copper_foil(trace_width_m: f64, foil_thickness_m: f64) -> Self {
        Conductor {
            resistivity_ohm_m: Self::COPPER_RESISTIVITY_OHM_M,
            foil_thickness_m,
            trace_width_m,
            relative_permeability: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let fields = [
            self.resistivity_ohm_m,
            self.foil_thickness_m,
            self.trace_width_m,
            self.relative_permeability,
        ];
        if fields.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(invalid("conductor", "all parameters must be positive and finite"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meander(w: f64, h: f64, p: f64) -> MeanderSpec {
        MeanderSpec {
            width_m: w,
            height_m: h,
            pitch_m: p,
            trace_width_m: 0.005,
            double_track: false,
        }
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn meander_reference_length_and_trace_count() {
        let path = gen_meander(&meander(0.30, 0.20, 0.02)).unwrap();
        // 10 long traces + 9 hairpins, summed independently of arc_length().
        let long = path
            .segments()
            .filter(|(a, b)| (a.y - b.y).abs() < 1e-12)
            .count();
        assert_eq!(long, 10);
        let total: f64 = path
            .vertices()
            .windows(2)
            .map(|w| ((w[1].x - w[0].x).powi(2) + (w[1].y - w[0].y).powi(2)).sqrt())
            .sum();
        assert!(close(total, 3.18, 1e-12), "{total}");
        assert!(close(path.arc_length(), 3.18, 1e-12));
        assert!(!path.is_closed());
        // Both terminals on the feed edge.
        assert_eq!(path.first().x, -0.15);
        assert_eq!(path.last().x, -0.15);
    }

    #[test]
    fn meander_minimal_hairpin() {
        let path = gen_meander(&meander(0.04, 0.04, 0.02)).unwrap();
        assert_eq!(path.vertices().len(), 4);
        assert_eq!(path.segment_count(), 3);
    }

    #[test]
    fn meander_rejects_pitch_at_or_above_height() {
        assert!(gen_meander(&meander(0.3, 0.02, 0.02)).is_err());
        assert!(gen_meander(&meander(0.3, 0.02, 0.03)).is_err());
        let mut narrow = meander(0.3, 0.2, 0.02);
        narrow.trace_width_m = 0.02;
        assert!(gen_meander(&narrow).is_err());
    }

    #[test]
    fn meander_adjacent_traces_antiparallel() {
        let path = gen_meander(&meander(0.30, 0.20, 0.02)).unwrap();
        let dirs: Vec<Point3> = path
            .segments()
            .filter(|(a, b)| (a.y - b.y).abs() < 1e-12)
            .map(|(a, b)| b - a)
            .collect();
        for pair in dirs.windows(2) {
            assert!(pair[0].dot(pair[1]) < 0.0);
        }
    }

    #[test]
    fn odd_fit_drops_to_even_trace_count() {
        let spec = meander(0.3, 0.06, 0.02);
        assert_eq!(spec.trace_count(), 2);
        let path = gen_meander(&spec).unwrap();
        assert_eq!(path.first().x, path.last().x);
    }

    fn spiral(turns: u32, w: f64, h: f64, p: f64) -> SpiralSpec {
        SpiralSpec {
            outer_width_m: w,
            outer_height_m: h,
            turns,
            pitch_m: p,
            trace_width_m: 0.001,
        }
    }

    #[test]
    fn single_turn_spiral_is_square_minus_lead_gap() {
        let path = gen_spiral(&spiral(1, 0.1, 0.1, 0.005)).unwrap();
        assert!(close(path.arc_length(), 0.4 - 0.005, 1e-12));
        assert!(close(path.terminal_gap(), 0.005, 1e-9));
    }

    #[test]
    fn spiral_turn_perimeters_shrink_by_eight_pitch() {
        let p = 0.01;
        let path = gen_spiral(&spiral(3, 0.3, 0.2, p)).unwrap();
        let seg: Vec<f64> = path.segments().map(|(a, b)| a.distance(b)).collect();
        // Each turn is 4 sides, the left one a pitch short, then the inward step.
        assert_eq!(seg.len(), 14);
        let turn_len = |k: usize| -> f64 { seg[5 * k..(5 * k + 5).min(14)].iter().sum::<f64>() };
        let mut perimeters: Vec<f64> = (0..3).map(turn_len).collect();
        perimeters[2] += p;
        assert!(close(perimeters[0], 1.0, 1e-12));
        for k in 1..3 {
            assert!(close(perimeters[k - 1] - perimeters[k], 8.0 * p, 1e-9));
        }
    }

    #[test]
    fn spiral_rejects_zero_turns_and_overfull() {
        assert!(gen_spiral(&spiral(0, 0.1, 0.1, 0.01)).is_err());
        assert!(gen_spiral(&spiral(5, 0.1, 0.1, 0.01)).is_err());
    }

    fn ring(turns: u32, tilt: f64) -> AngledCoilSpec {
        AngledCoilSpec {
            diameter_m: 0.02,
            turns,
            tilt_rad: tilt,
            trace_width_m: 0.0005,
        }
    }

    #[test]
    fn flat_ring_circumference() {
        let path = gen_angled_ring_coil(&ring(1, 0.0)).unwrap();
        assert!(close(path.arc_length(), PI * 0.02, 1e-3));
    }

    #[test]
    fn tilted_ring_is_elliptical_in_its_plane() {
        let tilt: f64 = 0.5;
        let path = gen_angled_ring_coil(&ring(3, tilt)).unwrap();
        let u = Point3::new(tilt.cos(), 0.0, tilt.sin());
        let v = Point3::new(0.0, 1.0, 0.0);
        let (mut umax, mut vmax) = (0.0_f64, 0.0_f64);
        for &p in path.vertices() {
            // Remove the per-turn rise before projecting.
            let flat = Point3::new(p.x, p.y, p.x * tilt.tan());
            umax = umax.max(flat.dot(u).abs());
            vmax = vmax.max(flat.dot(v).abs());
        }
        assert!(close(umax / vmax, 1.0 / tilt.cos(), 1e-6), "{}", umax / vmax);
    }

    #[test]
    fn ring_rejects_right_angle_tilt() {
        assert!(gen_angled_ring_coil(&ring(1, PI / 2.0)).is_err());
        assert!(gen_angled_ring_coil(&ring(1, 2.0)).is_err());
    }

    #[test]
    fn bend_flat_limit() {
        let path = discretize(&gen_meander(&meander(0.04, 0.04, 0.02)).unwrap(), 0.001).unwrap();
        let bent = apply_cylinder_bend(&path, 1e3, &BendAxis::default()).unwrap();
        for (a, b) in path.vertices().iter().zip(bent.vertices()) {
            assert!(a.distance(*b) < 1e-6);
        }
    }

    #[test]
    fn bend_preserves_each_trace_length() {
        // Traces along y so that they wrap around an x-parallel axis.
        let path = gen_meander(&meander(0.30, 0.20, 0.02)).unwrap();
        let axis = BendAxis {
            axis: Point3::new(0.0, 1.0, 0.0),
            ..BendAxis::default()
        };
        let radius = 0.15;
        let bent = apply_cylinder_bend(&path, radius, &axis).unwrap();
        // Chord shortfall bound for arcs of at most one bend step.
        let bound = (BEND_MAX_ARC_STEP_M / radius).powi(2) / 24.0;
        assert!(close(bent.arc_length(), path.arc_length(), bound));
        // Hairpins run along the axis and keep their length exactly.
        let hairpins = |p: &WirePath| -> f64 {
            p.segments()
                .filter(|(a, b)| (a.y - b.y).abs() > 1e-12)
                .map(|(a, b)| a.distance(b))
                .sum()
        };
        assert!(close(hairpins(&bent), hairpins(&path), 1e-12));
    }

    #[test]
    fn bend_keeps_surface_spacing_between_axis_parallel_traces() {
        let path = gen_meander(&meander(0.30, 0.20, 0.02)).unwrap();
        let radius = 0.10;
        let bent = apply_cylinder_bend(&path, radius, &BendAxis::default()).unwrap();
        // Traces stay parallel to x; their angular positions differ by pitch / radius.
        let angles: Vec<f64> = bent
            .segments()
            .filter(|(a, b)| (a.x - b.x).abs() > 0.1)
            .map(|(a, _)| a.y.atan2(a.z + radius))
            .collect();
        let mut sorted = angles.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        for pair in sorted.windows(2) {
            assert!(close((pair[1] - pair[0]) * radius, 0.02, 1e-12));
        }
    }

    #[test]
    fn bend_rejects_wider_than_circumference() {
        let path = gen_meander(&meander(0.30, 0.04, 0.02)).unwrap();
        let axis = BendAxis {
            axis: Point3::new(0.0, 1.0, 0.0),
            ..BendAxis::default()
        };
        assert!(matches!(
            apply_cylinder_bend(&path, 0.04, &axis),
            Err(GeometryError::BendSelfIntersection { .. })
        ));
    }

    #[test]
    fn discretize_counts() {
        let line = WirePath::new(vec![Point3::ZERO, Point3::new(1.0, 0.0, 0.0)], false).unwrap();
        assert_eq!(discretize(&line, 0.1).unwrap().vertices().len(), 11);
        let fine = discretize(&line, 2.0).unwrap();
        assert_eq!(fine, line);

        let m = gen_meander(&meander(0.30, 0.20, 0.02)).unwrap();
        let d = discretize(&m, 0.001).unwrap();
        // 10 traces of 300 pieces + 9 hairpins of 20 pieces.
        assert_eq!(d.segment_count(), 10 * 300 + 9 * 20);
        assert!(d.segments().all(|(a, b)| a.distance(b) <= 0.001 * (1.0 + 1e-12)));
    }

    #[test]
    fn discretize_closed_keeps_closing_segment() {
        let sq = WirePath::new(
            vec![
                Point3::ZERO,
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(1.0, 1.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            true,
        )
        .unwrap();
        let d = discretize(&sq, 0.25).unwrap();
        assert!(d.is_closed());
        assert_eq!(d.segment_count(), 16);
        assert!(close(d.arc_length(), 4.0, 1e-12));
    }

    #[test]
    fn path_validation() {
        assert_eq!(
            WirePath::new(vec![Point3::ZERO], false),
            Err(GeometryError::TooFewVertices(1))
        );
        assert!(matches!(
            WirePath::new(vec![Point3::ZERO, Point3::ZERO], false),
            Err(GeometryError::DegenerateSegment(0))
        ));
        assert!(matches!(
            WirePath::new(vec![Point3::ZERO, Point3::new(f64::NAN, 0.0, 0.0)], false),
            Err(GeometryError::NonFinite(1))
        ));
    }

    #[test]
    fn circuit_loop_requires_adjacent_terminals() {
        let line = WirePath::new(vec![Point3::ZERO, Point3::new(1.0, 0.0, 0.0)], false).unwrap();
        assert!(matches!(
            line.to_circuit_loop(),
            Err(GeometryError::DistantTerminals { .. })
        ));
        let m = gen_meander(&meander(0.30, 0.20, 0.02)).unwrap();
        let lp = m.to_circuit_loop().unwrap();
        assert!(lp.is_closed());
        assert!(close(lp.arc_length(), 3.18 + 0.18, 1e-12));
    }

    #[test]
    fn xyz_table_round_trip() {
        let m = gen_spiral(&spiral(2, 0.1, 0.08, 0.01)).unwrap();
        let text = m.to_xyz_table();
        assert!(text.lines().next().unwrap().starts_with('#'));
        assert_eq!(WirePath::from_xyz_table(&text).unwrap(), m);
    }

    #[test]
    fn segment_distance_cases() {
        let d = segment_segment_distance(
            Point3::ZERO,
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.5, 1.0, 0.0),
            Point3::new(0.5, 2.0, 0.0),
        );
        assert!(close(d, 1.0, 1e-12));
        // Parallel, overlapping.
        let d = segment_segment_distance(
            Point3::ZERO,
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.5, 0.0, 0.3),
            Point3::new(1.5, 0.0, 0.3),
        );
        assert!(close(d, 0.3, 1e-12));
        // Crossing.
        let d = segment_segment_distance(
            Point3::new(-1.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, -1.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        );
        assert!(d < 1e-12);
    }
}
