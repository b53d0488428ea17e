//! Ground-truth extended objects: geometry in a body frame plus a pose that
//! is either fixed or follows a waypoint spline.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use thiserror::Error;

use crate::ellipse::EllipseParams;
use crate::shape::{convex_hull, polygon_centroid, polygon_signed_area, Point, Shape};
use crate::starconvex::VALIDITY_GRID;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TargetError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon is not star-convex about its centroid")]
    NotStarConvex,
    #[error("polygon edges intersect")]
    SelfIntersecting,
    #[error("point group needs at least one member")]
    EmptyGroup,
    #[error("group header announces {expected} members but {got} were listed")]
    GroupCount { expected: usize, got: usize },
    #[error("trajectory needs at least 2 distinct waypoints")]
    ShortTrajectory,
    #[error("invalid ellipse semi-axes")]
    BadEllipse,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetGeometry {
    /// Semi-axes along body x and y, rotated by `orientation`.
    Ellipse { major: f64, minor: f64, orientation: f64 },
    /// Vertices relative to the area centroid.
    Polygon(Vec<Point>),
    /// Member positions relative to their mean.
    PointGroup(Vec<Point>),
}

impl TargetGeometry {
    pub fn ellipse(major: f64, minor: f64, orientation: f64) -> Result<Self, TargetError> {
        if !(major > 0.0 && minor > 0.0) {
            return Err(TargetError::BadEllipse);
        }
        Ok(Self::Ellipse {
            major,
            minor,
            orientation,
        })
    }

    /// Polygon re-centred on its area centroid, counter-clockwise, validated
    /// for simplicity and star-convexity.
    pub fn polygon(vertices: Vec<Point>) -> Result<Self, TargetError> {
        if vertices.len() < 3 {
            return Err(TargetError::TooFewVertices(vertices.len()));
        }
        let mut v = vertices;
        if polygon_signed_area(&v) < 0.0 {
            v.reverse();
        }
        let c = polygon_centroid(&v);
        let v: Vec<Point> = v.into_iter().map(|p| p - c).collect();
        if !is_simple(&v) {
            return Err(TargetError::SelfIntersecting);
        }
        if !is_star_convex(&v, &Point::zeros()) {
            return Err(TargetError::NotStarConvex);
        }
        Ok(Self::Polygon(v))
    }

    pub fn point_group(members: Vec<Point>) -> Result<Self, TargetError> {
        if members.is_empty() {
            return Err(TargetError::EmptyGroup);
        }
        let mean = members.iter().sum::<Point>() / members.len() as f64;
        Ok(Self::PointGroup(members.into_iter().map(|p| p - mean).collect()))
    }
}

fn segments_cross(a: &Point, b: &Point, c: &Point, d: &Point) -> bool {
    let orient = |p: &Point, q: &Point, r: &Point| (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

fn is_simple(v: &[Point]) -> bool {
    let n = v.len();
    for i in 0..n {
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_cross(&v[i], &v[(i + 1) % n], &v[j], &v[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// Distances along the ray from `center` at angle `phi` to every polygon
/// edge it crosses.
fn ray_hits(v: &[Point], center: &Point, phi: f64) -> Vec<f64> {
    let dir = Vector2::new(phi.cos(), phi.sin());
    let n = v.len();
    let mut hits = Vec::new();
    for i in 0..n {
        let (a, b) = (v[i] - center, v[(i + 1) % n] - center);
        let e = b - a;
        let denom = dir[0] * e[1] - dir[1] * e[0];
        if denom.abs() < 1e-300 {
            continue;
        }
        // a + u e = t dir
        let t = (a[0] * e[1] - a[1] * e[0]) / denom;
        let u = (a[0] * dir[1] - a[1] * dir[0]) / denom;
        if t > 0.0 && (0.0..1.0).contains(&u) {
            hits.push(t);
        }
    }
    hits
}

/// Boundary distance of a star-convex polygon along angle `phi`.
pub fn polygon_radius(v: &[Point], center: &Point, phi: f64) -> f64 {
    ray_hits(v, center, phi).into_iter().fold(f64::INFINITY, f64::min)
}

/// Whether the radius function about `center` is single-valued: every edge
/// turns strictly counter-clockwise as seen from `center` and the edges wind
/// around it exactly once. Equivalent to every ray meeting the boundary once.
pub fn is_star_convex(v: &[Point], center: &Point) -> bool {
    let n = v.len();
    let mut winding = 0.0;
    for i in 0..n {
        let (a, b) = (v[i] - center, v[(i + 1) % n] - center);
        let cross = a[0] * b[1] - a[1] * b[0];
        if !(cross > 0.0) {
            return false;
        }
        winding += cross.atan2(a.dot(&b));
    }
    (winding - 2.0 * PI).abs() < 1e-9
}

/// Cross-check of `is_star_convex` on the angular validity grid: counts ray
/// crossings away from vertex directions.
pub fn ray_crossings_on_grid(v: &[Point], center: &Point) -> Vec<usize> {
    (0..VALIDITY_GRID)
        .map(|k| ray_hits(v, center, 2.0 * PI * (k as f64 + 0.5) / VALIDITY_GRID as f64).len())
        .collect()
}

/// Uniform Catmull-Rom spline through waypoints, traversed at constant speed.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub waypoints: Vec<Point>,
    pub speed: f64,
    pub dt: f64,
    table: Vec<(f64, Point)>,
}

const SAMPLES_PER_SEGMENT: usize = 400;

impl Trajectory {
    pub fn new(waypoints: Vec<Point>, speed: f64, dt: f64) -> Result<Self, TargetError> {
        let mut pts = waypoints.clone();
        pts.dedup();
        if pts.len() < 2 {
            return Err(TargetError::ShortTrajectory);
        }
        let n = pts.len();
        let get = |i: isize| -> Point {
            if i < 0 {
                2.0 * pts[0] - pts[1]
            } else if i as usize >= n {
                2.0 * pts[n - 1] - pts[n - 2]
            } else {
                pts[i as usize]
            }
        };
        let mut table = Vec::with_capacity((n - 1) * SAMPLES_PER_SEGMENT + 1);
        let mut length = 0.0;
        let mut prev = pts[0];
        table.push((0.0, prev));
        for seg in 0..n - 1 {
            let i = seg as isize;
            let (p0, p1, p2, p3) = (get(i - 1), get(i), get(i + 1), get(i + 2));
            for k in 1..=SAMPLES_PER_SEGMENT {
                let t = k as f64 / SAMPLES_PER_SEGMENT as f64;
                let (t2, t3) = (t * t, t * t * t);
                let p = 0.5
                    * (2.0 * p1
                        + (p2 - p0) * t
                        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2
                        + (3.0 * p1 - p0 - 3.0 * p2 + p3) * t3);
                length += (p - prev).norm();
                table.push((length, p));
                prev = p;
            }
        }
        Ok(Self {
            waypoints,
            speed,
            dt,
            table,
        })
    }

    pub fn length(&self) -> f64 {
        self.table.last().map(|e| e.0).unwrap_or(0.0)
    }

    fn at_arclength(&self, s: f64) -> (Point, Vector2<f64>) {
        let s = s.clamp(0.0, self.length());
        let idx = self.table.partition_point(|e| e.0 < s).clamp(1, self.table.len() - 1);
        let (s0, p0) = self.table[idx - 1];
        let (s1, p1) = self.table[idx];
        let w = if s1 > s0 { (s - s0) / (s1 - s0) } else { 0.0 };
        let dir = (p1 - p0).normalize();
        (p0 + w * (p1 - p0), dir)
    }

    /// Position, heading and velocity at time step `k` (zero-based).
    pub fn pose(&self, k: usize) -> Pose {
        let (center, dir) = self.at_arclength(self.speed * self.dt * k as f64);
        Pose {
            center,
            heading: dir[1].atan2(dir[0]),
            velocity: dir * self.speed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub center: Point,
    pub heading: f64,
    pub velocity: Vector2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Motion {
    Static { center: Point, heading: f64 },
    Trajectory(Trajectory),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthTarget {
    pub geometry: TargetGeometry,
    pub motion: Motion,
}

/// The target placed in the world frame at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSnapshot {
    /// Region used for uniform source sampling and IoU; the convex hull for groups.
    pub region: Shape,
    /// Discrete members when the target is a point group.
    pub members: Option<Vec<Point>>,
    pub pose: Pose,
}

impl GroundTruthTarget {
    pub fn pose(&self, k: usize) -> Pose {
        match &self.motion {
            Motion::Static { center, heading } => Pose {
                center: *center,
                heading: *heading,
                velocity: Vector2::zeros(),
            },
            Motion::Trajectory(t) => t.pose(k),
        }
    }

    pub fn snapshot(&self, k: usize) -> TargetSnapshot {
        let pose = self.pose(k);
        let (s, c) = pose.heading.sin_cos();
        let rot = Matrix2::new(c, -s, s, c);
        let place = |pts: &[Point]| pts.iter().map(|p| pose.center + rot * p).collect::<Vec<_>>();
        match &self.geometry {
            TargetGeometry::Ellipse {
                major,
                minor,
                orientation,
            } => TargetSnapshot {
                region: Shape::Ellipse(EllipseParams::from_axes(
                    pose.center,
                    *major,
                    *minor,
                    orientation + pose.heading,
                )),
                members: None,
                pose,
            },
            TargetGeometry::Polygon(v) => TargetSnapshot {
                region: Shape::Polygon(place(v)),
                members: None,
                pose,
            },
            TargetGeometry::PointGroup(m) => {
                let members = place(m);
                TargetSnapshot {
                    region: Shape::Polygon(convex_hull(&members)),
                    members: Some(members),
                    pose,
                }
            }
        }
    }
}

fn parse_points<'a>(lines: impl Iterator<Item = (usize, &'a str)>) -> Result<Vec<Point>, TargetError> {
    lines
        .map(|(i, l)| {
            let mut it = l.split_whitespace().map(str::parse::<f64>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(x)), Some(Ok(y)), None) if x.is_finite() && y.is_finite() => Ok(Point::new(x, y)),
                _ => Err(TargetError::Syntax {
                    line: i + 1,
                    message: format!("expected `x y`, got `{l}`"),
                }),
            }
        })
        .collect()
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i, l))
    })
}

/// Plain-text vertex list: one `x y` pair per line, `#` starts a comment.
pub fn parse_polygon_file(text: &str) -> Result<Vec<Point>, TargetError> {
    parse_points(content_lines(text))
}

/// Point-group file: a `group <n>` header line followed by `n` lines of `x y`.
pub fn parse_group_file(text: &str) -> Result<Vec<Point>, TargetError> {
    let mut lines = content_lines(text);
    let (i, header) = lines.next().ok_or(TargetError::EmptyGroup)?;
    let expected = header
        .strip_prefix("group")
        .and_then(|n| n.trim().parse::<usize>().ok())
        .ok_or_else(|| TargetError::Syntax {
            line: i + 1,
            message: format!("expected `group <count>` header, got `{header}`"),
        })?;
    let members = parse_points(lines)?;
    if members.len() != expected {
        return Err(TargetError::GroupCount {
            expected,
            got: members.len(),
        });
    }
    if members.is_empty() {
        return Err(TargetError::EmptyGroup);
    }
    Ok(members)
}
