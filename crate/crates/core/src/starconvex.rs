//! Star-convex shapes described by a truncated Fourier series of the radius
//! function around a center point.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Vector2};
use thiserror::Error;

/// Angular grid used for validity checks and polygonization.
pub const VALIDITY_GRID: usize = 3600;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FourierError {
    #[error("number of Fourier coefficients must be odd and positive, got {0}")]
    EvenLength(usize),
    #[error("least-squares projection needs at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
}

/// Row vector `[1/2, cos t, sin t, cos 2t, sin 2t, ...]` of length `n_coeffs`.
pub fn fourier_basis(phi: f64, n_coeffs: usize) -> Result<DVector<f64>, FourierError> {
    if n_coeffs == 0 || n_coeffs.is_multiple_of(2) {
        return Err(FourierError::EvenLength(n_coeffs));
    }
    let mut row = DVector::zeros(n_coeffs);
    fill_basis(phi, row.as_mut_slice());
    Ok(row)
}

fn fill_basis(phi: f64, out: &mut [f64]) {
    out[0] = 0.5;
    for j in 1..=(out.len() - 1) / 2 {
        let (s, c) = (j as f64 * phi).sin_cos();
        out[2 * j - 1] = c;
        out[2 * j] = s;
    }
}

/// Number of harmonics for a coefficient vector of length `n_coeffs`.
pub fn harmonics(n_coeffs: usize) -> usize {
    (n_coeffs - 1) / 2
}

#[derive(Debug, Clone, PartialEq)]
pub struct FourierShapeParams {
    pub center: Vector2<f64>,
    pub coeffs: DVector<f64>,
}

impl FourierShapeParams {
    pub fn new(center: Vector2<f64>, coeffs: DVector<f64>) -> Result<Self, FourierError> {
        if coeffs.is_empty() || coeffs.len().is_multiple_of(2) {
            return Err(FourierError::EvenLength(coeffs.len()));
        }
        Ok(Self { center, coeffs })
    }

    /// Circle of the given radius with `n_coeffs` coefficients.
    pub fn circle(center: Vector2<f64>, radius: f64, n_coeffs: usize) -> Result<Self, FourierError> {
        let mut coeffs = DVector::zeros(n_coeffs);
        if n_coeffs > 0 {
            coeffs[0] = 2.0 * radius;
        }
        Self::new(center, coeffs)
    }

    pub fn radius(&self, phi: f64) -> f64 {
        let mut r = 0.5 * self.coeffs[0];
        for j in 1..=harmonics(self.coeffs.len()) {
            let (s, c) = (j as f64 * phi).sin_cos();
            r += self.coeffs[2 * j - 1] * c + self.coeffs[2 * j] * s;
        }
        r
    }

    /// Smallest radius over the validity grid.
    pub fn min_radius(&self) -> f64 {
        (0..VALIDITY_GRID)
            .map(|k| self.radius(2.0 * PI * k as f64 / VALIDITY_GRID as f64))
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether the radius is strictly positive on the validity grid.
    pub fn is_valid(&self) -> bool {
        self.min_radius() > 0.0
    }

    pub fn boundary_point(&self, phi: f64) -> Vector2<f64> {
        self.center + self.radius(phi) * Vector2::new(phi.cos(), phi.sin())
    }

    /// `|m - z|^2 - r(angle(z - m))^2`.
    pub fn implicit(&self, z: &Vector2<f64>) -> f64 {
        self.scaled_implicit(z, 1.0)
    }

    /// `|m - z|^2 - s^2 r(angle(z - m))^2`.
    pub fn scaled_implicit(&self, z: &Vector2<f64>, s: f64) -> f64 {
        let d = z - self.center;
        let phi = if d.norm_squared() == 0.0 { 0.0 } else { d[1].atan2(d[0]) };
        let r = self.radius(phi);
        d.norm_squared() - s * s * r * r
    }

    /// Boundary vertices at `VALIDITY_GRID` evenly spaced angles, with
    /// negative radii clamped to zero.
    pub fn polygon(&self) -> Vec<Vector2<f64>> {
        let table = basis_table(self.coeffs.len(), VALIDITY_GRID);
        let n = self.coeffs.len();
        (0..VALIDITY_GRID)
            .map(|k| {
                let row = &table[k * n..(k + 1) * n];
                let r: f64 = row.iter().zip(self.coeffs.iter()).map(|(a, b)| a * b).sum();
                let phi = 2.0 * PI * k as f64 / VALIDITY_GRID as f64;
                self.center + r.max(0.0) * Vector2::new(phi.cos(), phi.sin())
            })
            .collect()
    }
}

fn basis_table(n_coeffs: usize, n_angles: usize) -> Vec<f64> {
    let mut t = vec![0.0; n_coeffs * n_angles];
    for k in 0..n_angles {
        let phi = 2.0 * PI * k as f64 / n_angles as f64;
        fill_basis(phi, &mut t[k * n_coeffs..(k + 1) * n_coeffs]);
    }
    t
}

/// Angle of `measurement - center` against the x-axis in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleEstimate {
    pub angle: f64,
    /// Measurement coincided with the center; `angle` is 0 by convention.
    pub degenerate: bool,
}

pub fn angle_point_estimate(measurement: &Vector2<f64>, center: &Vector2<f64>) -> AngleEstimate {
    let d = measurement - center;
    if d.norm_squared() == 0.0 {
        return AngleEstimate {
            angle: 0.0,
            degenerate: true,
        };
    }
    let mut angle = d[1].atan2(d[0]);
    if angle <= -PI {
        angle = PI;
    }
    AngleEstimate {
        angle,
        degenerate: false,
    }
}

/// Least-squares Fourier coefficients for sampled `(angle, radius)` pairs.
pub fn fit_radius_function(samples: &[(f64, f64)], n_coeffs: usize) -> Result<DVector<f64>, FourierError> {
    if n_coeffs == 0 || n_coeffs.is_multiple_of(2) {
        return Err(FourierError::EvenLength(n_coeffs));
    }
    if samples.len() < n_coeffs {
        return Err(FourierError::TooFewSamples {
            needed: n_coeffs,
            got: samples.len(),
        });
    }
    let mut design = DMatrix::zeros(samples.len(), n_coeffs);
    let mut rhs = DVector::zeros(samples.len());
    let mut row = vec![0.0; n_coeffs];
    for (i, (phi, r)) in samples.iter().enumerate() {
        fill_basis(*phi, &mut row);
        for (j, v) in row.iter().enumerate() {
            design[(i, j)] = *v;
        }
        rhs[i] = *r;
    }
    let svd = design.svd(true, true);
    Ok(svd.solve(&rhs, 1e-12).expect("SVD computed with both factors"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ellipse::EllipseParams;

    fn circle15() -> FourierShapeParams {
        FourierShapeParams::circle(Vector2::zeros(), 1.5, 15).unwrap()
    }

    #[test]
    fn basis_values() {
        let b = fourier_basis(0.0, 5).unwrap();
        assert_eq!(b.as_slice(), &[0.5, 1.0, 0.0, 1.0, 0.0]);
        let b = fourier_basis(PI / 2.0, 5).unwrap();
        let want = [0.5, 0.0, 1.0, -1.0, 0.0];
        for (x, y) in b.iter().zip(want) {
            assert!((x - y).abs() < 1e-15);
        }
        let b = fourier_basis(PI / 4.0, 3).unwrap();
        let h = 2f64.sqrt() / 2.0;
        assert!((b[1] - h).abs() < 1e-15 && (b[2] - h).abs() < 1e-15);
        assert_eq!(fourier_basis(0.0, 4), Err(FourierError::EvenLength(4)));
    }

    #[test]
    fn radius_values() {
        let c = circle15();
        for k in 0..16 {
            assert_eq!(c.radius(k as f64 * 0.4), 1.5);
        }
        let p = FourierShapeParams::new(Vector2::zeros(), DVector::from_vec(vec![2.0, 1.0, 0.0])).unwrap();
        assert_eq!(p.radius(0.0), 2.0);
        assert!(FourierShapeParams::new(Vector2::zeros(), DVector::zeros(2)).is_err());
    }

    #[test]
    fn implicit_values() {
        let c = circle15();
        assert_eq!(c.implicit(&Vector2::new(1.5, 0.0)), 0.0);
        assert_eq!(c.implicit(&Vector2::new(0.0, 0.0)), -2.25);
        assert_eq!(c.implicit(&Vector2::new(3.0, 0.0)), 6.75);
        assert_eq!(c.scaled_implicit(&Vector2::new(0.75, 0.0), 0.5), 0.0);
        assert_eq!(c.scaled_implicit(&Vector2::new(1.5, 0.0), 0.5), 1.6875);
    }

    #[test]
    fn angle_estimates() {
        let a = angle_point_estimate(&Vector2::new(1.0, 1.0), &Vector2::zeros());
        assert!((a.angle - PI / 4.0).abs() < 1e-15);
        let a = angle_point_estimate(&Vector2::new(-1.0, 0.0), &Vector2::zeros());
        assert_eq!(a.angle, PI);
        let a = angle_point_estimate(&Vector2::new(-1.0, -0.0), &Vector2::zeros());
        assert_eq!(a.angle, PI);
        let a = angle_point_estimate(&Vector2::new(2.0, 3.0), &Vector2::new(2.0, 2.0));
        assert!((a.angle - PI / 2.0).abs() < 1e-15);
        let a = angle_point_estimate(&Vector2::new(2.0, 2.0), &Vector2::new(2.0, 2.0));
        assert!(a.degenerate && a.angle == 0.0);
    }

    #[test]
    fn single_coefficient_is_constant() {
        let p = FourierShapeParams::new(Vector2::zeros(), DVector::from_vec(vec![0.8])).unwrap();
        for k in 0..10 {
            assert_eq!(p.radius(k as f64), 0.4);
        }
    }

    #[test]
    fn ellipse_is_representable_with_fifteen_harmonics() {
        let e = EllipseParams::from_axes(Vector2::zeros(), 2.0, 1.0, 0.3);
        let inv = e.inverse_shape();
        let samples: Vec<(f64, f64)> = (0..VALIDITY_GRID)
            .map(|k| {
                let phi = 2.0 * PI * k as f64 / VALIDITY_GRID as f64;
                let u = Vector2::new(phi.cos(), phi.sin());
                (phi, 1.0 / (u.dot(&(inv * u))).sqrt())
            })
            .collect();
        let coeffs = fit_radius_function(&samples, 31).unwrap();
        let fit = FourierShapeParams::new(Vector2::zeros(), coeffs).unwrap();
        let mean_r = samples.iter().map(|s| s.1).sum::<f64>() / samples.len() as f64;
        let max_err = samples
            .iter()
            .map(|(phi, r)| (fit.radius(*phi) - r).abs())
            .fold(0.0, f64::max);
        assert!(max_err < 0.01 * mean_r, "{max_err}");
    }

    #[test]
    fn polygon_clamps_negative_radius() {
        let p = FourierShapeParams::new(Vector2::zeros(), DVector::from_vec(vec![0.2, 1.0, 0.0])).unwrap();
        assert!(!p.is_valid());
        let poly = p.polygon();
        assert_eq!(poly.len(), VALIDITY_GRID);
        assert_eq!(poly[VALIDITY_GRID / 2], Vector2::zeros());
    }
}
