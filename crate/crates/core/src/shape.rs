//! Planar regions shared by estimators, ground truth and metrics, plus the
//! rasterized intersection-over-union.

use std::f64::consts::PI;

use nalgebra::Vector2;
use thiserror::Error;

use crate::ellipse::EllipseParams;
use crate::starconvex::{FourierShapeParams, VALIDITY_GRID};

/// Raster resolution per axis for IoU.
pub const IOU_GRID: usize = 1024;

pub type Point = Vector2<f64>;

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Ellipse(EllipseParams),
    StarConvex(FourierShapeParams),
    /// Simple polygon, vertices in order.
    Polygon(Vec<Point>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("union of the two shapes covers no raster cell")]
    EmptyUnion,
    #[error("shape has non-finite coordinates")]
    NonFinite,
}

impl Shape {
    pub fn center(&self) -> Point {
        match self {
            Shape::Ellipse(e) => e.center,
            Shape::StarConvex(f) => f.center,
            Shape::Polygon(v) => polygon_centroid(v),
        }
    }

    /// Area centroid. Differs from `center` for star-convex shapes, whose
    /// first harmonics shift the region away from the radius-function origin.
    pub fn centroid(&self) -> Point {
        match self {
            Shape::StarConvex(_) => {
                let v = self.boundary_polygon();
                if polygon_signed_area(&v).abs() > 0.0 {
                    polygon_centroid(&v)
                } else {
                    self.center()
                }
            }
            _ => self.center(),
        }
    }

    /// Closed boundary as a vertex list. Smooth shapes are sampled at
    /// `VALIDITY_GRID` angles; star-convex radii are clamped at zero and
    /// ellipses are repaired first.
    pub fn boundary_polygon(&self) -> Vec<Point> {
        match self {
            Shape::Ellipse(e) => {
                let mut e = *e;
                e.repair();
                (0..VALIDITY_GRID)
                    .map(|k| e.boundary_point(2.0 * PI * k as f64 / VALIDITY_GRID as f64))
                    .collect()
            }
            Shape::StarConvex(f) => f.polygon(),
            Shape::Polygon(v) => v.clone(),
        }
    }

    /// Whether a point lies inside.
    pub fn contains(&self, z: &Point) -> bool {
        match self {
            Shape::Ellipse(e) => e.implicit(z) <= 0.0,
            Shape::StarConvex(f) => {
                let d = z - f.center;
                let phi = d[1].atan2(d[0]);
                d.norm() <= f.radius(phi).max(0.0)
            }
            Shape::Polygon(v) => point_in_polygon(v, z),
        }
    }

    pub fn bounding_box(&self) -> BoundingBox {
        match self {
            Shape::Ellipse(e) => {
                let mut e = *e;
                e.repair();
                // half-widths are the square roots of the diagonal of (L L^T)^-1
                let inv = e.inverse_shape();
                let det = inv.determinant();
                let half = Point::new((inv[(1, 1)] / det).sqrt(), (inv[(0, 0)] / det).sqrt());
                BoundingBox {
                    min: e.center - half,
                    max: e.center + half,
                }
            }
            Shape::Polygon(v) => BoundingBox::of(v),
            Shape::StarConvex(_) => BoundingBox::of(&self.boundary_polygon()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min: Point,
    pub max: Point,
}

impl BoundingBox {
    pub fn of(points: &[Point]) -> Self {
        let mut min = Point::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            min = min.inf(p);
            max = max.sup(p);
        }
        Self { min, max }
    }

    pub fn union(&self, other: &BoundingBox) -> Self {
        Self {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.min.iter().chain(self.max.iter()).all(|v| v.is_finite())
    }
}

/// Signed area (positive for counter-clockwise order).
pub fn polygon_signed_area(v: &[Point]) -> f64 {
    let n = v.len();
    (0..n)
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        * 0.5
}

/// Area centroid of a simple polygon.
pub fn polygon_centroid(v: &[Point]) -> Point {
    let n = v.len();
    let area = polygon_signed_area(v);
    if area.abs() < 1e-300 {
        return v.iter().sum::<Point>() / n as f64;
    }
    let mut c = Point::zeros();
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        let cross = a[0] * b[1] - b[0] * a[1];
        c += (a + b) * cross;
    }
    c / (6.0 * area)
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(v: &[Point], z: &Point) -> bool {
    let n = v.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (v[i], v[j]);
        if (a[1] > z[1]) != (b[1] > z[1]) {
            let x = a[0] + (z[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if z[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Convex hull (counter-clockwise, monotone chain).
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: &Point, a: &Point, b: &Point| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for p in &pts {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    let lower = hull.len() + 1;
    for p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    hull.pop();
    hull
}

/// Per-row inside intervals (pixel index ranges) of a polygon rasterized by
/// pixel centers.
struct Raster {
    rows: Vec<Vec<(usize, usize)>>,
}

impl Raster {
    fn new(poly: &[Point], bbox: &BoundingBox, n: usize) -> Self {
        let dx = (bbox.max[0] - bbox.min[0]) / n as f64;
        let dy = (bbox.max[1] - bbox.min[1]) / n as f64;
        let mut crossings: Vec<Vec<f64>> = vec![Vec::new(); n];
        let m = poly.len();
        for i in 0..m {
            let (a, b) = (poly[i], poly[(i + 1) % m]);
            if a[1] == b[1] {
                continue;
            }
            let (lo, hi) = if a[1] < b[1] { (a, b) } else { (b, a) };
            // rows whose center y lies in [lo.y, hi.y)
            let first = ((lo[1] - bbox.min[1]) / dy - 0.5).ceil().max(0.0) as usize;
            let last_f = (hi[1] - bbox.min[1]) / dy - 0.5;
            if last_f < 0.0 {
                continue;
            }
            let mut last = last_f.floor() as usize;
            if last as f64 == last_f {
                // half-open upper end
                if last == 0 {
                    continue;
                }
                last -= 1;
            }
            let last = last.min(n - 1);
            for (row, cross) in crossings.iter_mut().enumerate().take(last + 1).skip(first) {
                let y = bbox.min[1] + (row as f64 + 0.5) * dy;
                let t = (y - lo[1]) / (hi[1] - lo[1]);
                cross.push(lo[0] + t * (hi[0] - lo[0]));
            }
        }
        let rows = crossings
            .into_iter()
            .map(|mut xs| {
                xs.sort_by(f64::total_cmp);
                xs.chunks_exact(2)
                    .filter_map(|pair| {
                        // pixel columns with center x in [x0, x1)
                        let c0 = ((pair[0] - bbox.min[0]) / dx - 0.5).ceil().max(0.0);
                        let c1 = ((pair[1] - bbox.min[0]) / dx - 0.5).ceil().min(n as f64);
                        (c1 > c0).then_some((c0 as usize, c1 as usize))
                    })
                    .collect()
            })
            .collect();
        Self { rows }
    }

    fn count(&self) -> usize {
        self.rows.iter().flatten().map(|(a, b)| b - a).sum()
    }

    fn intersection(&self, other: &Raster) -> usize {
        self.rows
            .iter()
            .zip(&other.rows)
            .map(|(ra, rb)| {
                let mut total = 0;
                for (a0, a1) in ra {
                    for (b0, b1) in rb {
                        let lo = (*a0).max(*b0);
                        let hi = (*a1).min(*b1);
                        if hi > lo {
                            total += hi - lo;
                        }
                    }
                }
                total
            })
            .sum()
    }
}

/// Intersection over union of two regions rasterized on an
/// `IOU_GRID x IOU_GRID` grid spanning their joint bounding box.
pub fn shape_iou(a: &Shape, b: &Shape) -> Result<f64, MetricError> {
    polygon_iou(&a.boundary_polygon(), &b.boundary_polygon())
}

pub fn polygon_iou(pa: &[Point], pb: &[Point]) -> Result<f64, MetricError> {
    let bbox = BoundingBox::of(pa).union(&BoundingBox::of(pb));
    if !bbox.is_finite() {
        return Err(MetricError::NonFinite);
    }
    if !(bbox.max[0] > bbox.min[0]) || !(bbox.max[1] > bbox.min[1]) {
        return Err(MetricError::EmptyUnion);
    }
    let ra = Raster::new(pa, &bbox, IOU_GRID);
    let rb = Raster::new(pb, &bbox, IOU_GRID);
    let inter = ra.intersection(&rb);
    let union = ra.count() + rb.count() - inter;
    if union == 0 {
        return Err(MetricError::EmptyUnion);
    }
    Ok(inter as f64 / union as f64)
}
