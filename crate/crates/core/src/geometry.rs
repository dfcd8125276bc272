//! Planar zones, buffer expansion and distance queries.
//!
//! A [`Zone`] is a simple polygon stored counter-clockwise. A [`BufferedZone`]
//! is its Minkowski sum with a disc of radius `buffer_m`, so membership is a
//! plain distance test against the base polygon. The boundary of the buffered
//! zone is the virtual stop line; the base polygon boundary is the 0 cm line.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used for on-boundary classification, in meters.
const BOUNDARY_EPS: f64 = 1e-12;

/// Default buffer between the virtual stop line and the danger zone.
pub const DEFAULT_BUFFER_M: f64 = 0.30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("zone `{id}`: polygon needs at least 3 vertices, got {count}")]
    TooFewVertices { id: String, count: usize },
    #[error("zone `{id}`: vertex {index} is not finite")]
    NonFinite { id: String, index: usize },
    #[error("zone `{id}`: polygon has zero area")]
    ZeroArea { id: String },
    #[error("zone `{id}`: edges {a} and {b} intersect")]
    SelfIntersecting { id: String, a: usize, b: usize },
    #[error("buffer must be a finite non-negative distance, got {0}")]
    InvalidBuffer(f64),
    #[error("world extent is empty or not finite")]
    InvalidExtent,
    #[error("zone `{id}` is not inside the world extent")]
    ZoneOutsideExtent { id: String },
}

/// A point (or vector) in the world frame, in meters.
///
/// Serialized as a two-element `[x, y]` array.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Point2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Point2 { x, y }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

// plain methods keep call sites free of operator-trait imports
#[allow(clippy::should_implement_trait)]
impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    /// Unit vector pointing along `heading` (radians, counter-clockwise from +x).
    pub fn from_heading(heading: f64) -> Self {
        Point2::new(heading.cos(), heading.sin())
    }

    pub fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }

    pub fn scale(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Point2) -> f64 {
        self.sub(o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Distance from `p` to the closed segment `a`–`b`.
pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a.add(ab.scale(t)))
}

fn orientation(a: Point2, b: Point2, c: Point2) -> f64 {
    b.sub(a).cross(c.sub(a))
}

fn on_segment(p: Point2, a: Point2, b: Point2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test (touching counts).
fn segments_intersect(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool {
    let d1 = orientation(q1, q2, p1);
    let d2 = orientation(q1, q2, p2);
    let d3 = orientation(p1, p2, q1);
    let d4 = orientation(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(p1, q1, q2))
        || (d2 == 0.0 && on_segment(p2, q1, q2))
        || (d3 == 0.0 && on_segment(q1, p1, p2))
        || (d4 == 0.0 && on_segment(q2, p1, p2))
}

fn signed_area(vertices: &[Point2]) -> f64 {
    let n = vertices.len();
    let twice: f64 = (0..n).map(|i| vertices[i].cross(vertices[(i + 1) % n])).sum();
    twice / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneKind {
    #[default]
    Danger,
}

#[derive(Deserialize)]
struct RawZone {
    id: String,
    polygon: Vec<Point2>,
    #[serde(default)]
    kind: ZoneKind,
}

/// A simple polygonal danger region with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawZone")]
pub struct Zone {
    id: String,
    polygon: Vec<Point2>,
    kind: ZoneKind,
}

impl TryFrom<RawZone> for Zone {
    type Error = GeometryError;

    fn try_from(raw: RawZone) -> Result<Self, Self::Error> {
        let mut zone = Zone::new(raw.id, raw.polygon)?;
        zone.kind = raw.kind;
        Ok(zone)
    }
}

impl Zone {
    /// Validates the polygon and normalizes it to counter-clockwise order.
    pub fn new(id: impl Into<String>, polygon: Vec<Point2>) -> Result<Self, GeometryError> {
        let id = id.into();
        if polygon.len() < 3 {
            return Err(GeometryError::TooFewVertices {
                id,
                count: polygon.len(),
            });
        }
        if let Some(index) = polygon.iter().position(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinite { id, index });
        }
        let area = signed_area(&polygon);
        if area.abs() <= f64::EPSILON {
            return Err(GeometryError::ZeroArea { id });
        }
        check_simple(&id, &polygon)?;
        let mut polygon = polygon;
        if area < 0.0 {
            polygon.reverse();
        }
        Ok(Zone {
            id,
            polygon,
            kind: ZoneKind::Danger,
        })
    }

    /// Axis-aligned rectangle spanning `min`..`max`.
    pub fn rectangle(id: impl Into<String>, min: Point2, max: Point2) -> Result<Self, GeometryError> {
        Zone::new(id, vec![min, Point2::new(max.x, min.y), max, Point2::new(min.x, max.y)])
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kind(&self) -> ZoneKind {
        self.kind
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.polygon
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.polygon)
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.polygon.len();
        (0..n).map(move |i| (self.polygon[i], self.polygon[(i + 1) % n]))
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bounds(&self) -> (Point2, Point2) {
        self.polygon.iter().fold(
            (
                Point2::new(f64::INFINITY, f64::INFINITY),
                Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
            ),
            |(lo, hi), p| {
                (
                    Point2::new(lo.x.min(p.x), lo.y.min(p.y)),
                    Point2::new(hi.x.max(p.x), hi.y.max(p.y)),
                )
            },
        )
    }

    /// Minimum distance from `p` to the polygon boundary.
    pub fn boundary_distance(&self, p: Point2) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Closed containment: interior or boundary.
    pub fn contains(&self, p: Point2) -> bool {
        self.boundary_distance(p) <= BOUNDARY_EPS || self.contains_strict(p)
    }

    // even-odd crossing test; boundary points may go either way
    fn contains_strict(&self, p: Point2) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

fn check_simple(id: &str, polygon: &[Point2]) -> Result<(), GeometryError> {
    let n = polygon.len();
    let edge = |i: usize| (polygon[i], polygon[(i + 1) % n]);
    for i in 0..n {
        let (a, b) = edge(i);
        if a == b {
            return Err(GeometryError::ZeroArea { id: id.to_string() });
        }
        for j in (i + 1)..n {
            let (c, d) = edge(j);
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // shared vertex is allowed; a fold-back along the same line is not
                let (shared, other_i, other_j) = if j == i + 1 { (b, a, d) } else { (a, b, c) };
                let u = other_i.sub(shared);
                let v = other_j.sub(shared);
                if u.cross(v) == 0.0 && u.dot(v) > 0.0 {
                    return Err(GeometryError::SelfIntersecting {
                        id: id.to_string(),
                        a: i,
                        b: j,
                    });
                }
            } else if segments_intersect(a, b, c, d) {
                return Err(GeometryError::SelfIntersecting {
                    id: id.to_string(),
                    a: i,
                    b: j,
                });
            }
        }
    }
    Ok(())
}

/// Distance from `p` to zone `z`; zero inside or on the boundary.
pub fn distance_to_zone(p: Point2, z: &Zone) -> f64 {
    if z.contains(p) {
        0.0
    } else {
        z.boundary_distance(p)
    }
}

/// True if the closed segment `a`–`b` touches the zone.
pub fn segment_enters_zone(a: Point2, b: Point2, z: &Zone) -> bool {
    z.contains(a) || z.contains(b) || z.edges().any(|(c, d)| segments_intersect(a, b, c, d))
}

/// Positive outside the zone, negative (penetration depth) inside.
pub fn signed_stop_distance(p: Point2, z: &Zone) -> f64 {
    let d = z.boundary_distance(p);
    if d <= BOUNDARY_EPS {
        0.0
    } else if z.contains_strict(p) {
        -d
    } else {
        d
    }
}

/// A danger zone expanded by a disc of radius `buffer_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferedZone {
    pub base: Zone,
    pub buffer_m: f64,
}

impl BufferedZone {
    pub fn new(base: Zone, buffer_m: f64) -> Result<Self, GeometryError> {
        if !buffer_m.is_finite() || buffer_m < 0.0 {
            return Err(GeometryError::InvalidBuffer(buffer_m));
        }
        Ok(BufferedZone { base, buffer_m })
    }

    pub fn contains(&self, p: Point2) -> bool {
        in_buffered_zone(p, self)
    }
}

pub fn in_buffered_zone(p: Point2, bz: &BufferedZone) -> bool {
    distance_to_zone(p, &bz.base) <= bz.buffer_m
}

/// Axis-aligned room extent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub min: Point2,
    pub max: Point2,
}

impl Default for Extent {
    fn default() -> Self {
        Extent {
            min: Point2::new(0.0, 0.0),
            max: Point2::new(8.0, 8.0),
        }
    }
}

impl Extent {
    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn center(&self) -> Point2 {
        self.min.add(self.max).scale(0.5)
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

fn default_buffer() -> f64 {
    DEFAULT_BUFFER_M
}

/// Room extent plus the danger zones and the shared buffer width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    #[serde(default)]
    pub extent: Extent,
    pub zones: Vec<Zone>,
    #[serde(default = "default_buffer")]
    pub buffer_m: f64,
}

impl WorldConfig {
    pub fn new(extent: Extent, zones: Vec<Zone>, buffer_m: f64) -> Result<Self, GeometryError> {
        let world = WorldConfig {
            extent,
            zones,
            buffer_m,
        };
        world.validate()?;
        Ok(world)
    }

    /// 8 m square room with a 2 m square danger zone in the bottom-right corner.
    pub fn default_lab() -> Self {
        let zone =
            Zone::rectangle("danger", Point2::new(6.0, 0.0), Point2::new(8.0, 2.0)).expect("static rectangle is valid");
        WorldConfig {
            extent: Extent::default(),
            zones: vec![zone],
            buffer_m: DEFAULT_BUFFER_M,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let e = &self.extent;
        if !(e.min.is_finite() && e.max.is_finite()) || e.max.x <= e.min.x || e.max.y <= e.min.y {
            return Err(GeometryError::InvalidExtent);
        }
        if !self.buffer_m.is_finite() || self.buffer_m < 0.0 {
            return Err(GeometryError::InvalidBuffer(self.buffer_m));
        }
        for z in &self.zones {
            if !z.vertices().iter().all(|&p| e.contains(p)) {
                return Err(GeometryError::ZoneOutsideExtent { id: z.id().to_string() });
            }
        }
        Ok(())
    }

    pub fn buffered_zones(&self) -> impl Iterator<Item = BufferedZone> + '_ {
        self.zones.iter().map(|z| BufferedZone {
            base: z.clone(),
            buffer_m: self.buffer_m,
        })
    }

    /// Signed distance to the nearest danger zone (most negative if inside several).
    pub fn signed_stop_distance(&self, p: Point2) -> f64 {
        self.zones
            .iter()
            .map(|z| signed_stop_distance(p, z))
            .fold(f64::INFINITY, f64::min)
    }
}
