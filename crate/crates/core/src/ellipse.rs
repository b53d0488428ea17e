//! Ellipses parameterized by the lower Cholesky factor `L = [[a, 0], [c, b]]`
//! of the inverse shape matrix, `A^-1 = L L^T`.

use std::f64::consts::PI;

use nalgebra::{Matrix2, SymmetricEigen, Vector2};

/// Floor applied to vanishing diagonal entries of `L`.
pub const MIN_DIAGONAL: f64 = 1e-6;

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_TOL: f64 = 1e-12;
const COARSE_ANGLES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseParams {
    pub center: Vector2<f64>,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Semi-axes and orientation read off the eigendecomposition of `(L L^T)^-1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseAxes {
    pub major: f64,
    pub minor: f64,
    /// Direction of the major axis, radians in `(-pi/2, pi/2]`.
    pub orientation: f64,
}

impl EllipseParams {
    pub fn new(center: Vector2<f64>, a: f64, b: f64, c: f64) -> Self {
        Self { center, a, b, c }
    }

    /// Ellipse with the given semi-axes, rotated by `orientation` radians.
    pub fn from_axes(center: Vector2<f64>, major: f64, minor: f64, orientation: f64) -> Self {
        let (s, c) = orientation.sin_cos();
        let rot = Matrix2::new(c, -s, s, c);
        let inv_shape = rot * Matrix2::new(1.0 / (major * major), 0.0, 0.0, 1.0 / (minor * minor)) * rot.transpose();
        let l = inv_shape
            .cholesky()
            .expect("positive semi-axes give a positive definite matrix")
            .l();
        Self::new(center, l[(0, 0)], l[(1, 1)], l[(1, 0)])
    }

    pub fn chol(&self) -> Matrix2<f64> {
        Matrix2::new(self.a, 0.0, self.c, self.b)
    }

    /// `A^-1 = L L^T`.
    pub fn inverse_shape(&self) -> Matrix2<f64> {
        let l = self.chol();
        l * l.transpose()
    }

    /// Positive Cholesky diagonal; `canonicalize` maps any non-degenerate
    /// parameter vector to a valid one describing the same ellipse.
    pub fn is_valid(&self) -> bool {
        self.a > 0.0 && self.b > 0.0 && self.c.is_finite() && self.center.iter().all(|v| v.is_finite())
    }

    /// Flips the signs of `(a, c)` when `a < 0` and of `b` when `b < 0`,
    /// which negates a column of `L` and leaves `L L^T` unchanged.
    pub fn canonicalize(&mut self) -> bool {
        let flip_a = self.a < 0.0;
        let flip_b = self.b < 0.0;
        if flip_a {
            self.a = -self.a;
            self.c = -self.c;
        }
        if flip_b {
            self.b = -self.b;
        }
        flip_a || flip_b
    }

    /// Canonicalizes signs, then clamps diagonal entries below `MIN_DIAGONAL`
    /// (or NaN) to `MIN_DIAGONAL`; returns whether anything changed.
    pub fn repair(&mut self) -> bool {
        let mut changed = self.canonicalize();
        for v in [&mut self.a, &mut self.b] {
            if !(*v >= MIN_DIAGONAL) {
                *v = MIN_DIAGONAL;
                changed = true;
            }
        }
        changed
    }

    pub fn axes(&self) -> EllipseAxes {
        let eig = SymmetricEigen::new(self.inverse_shape());
        let (imax, imin) = if eig.eigenvalues[0] <= eig.eigenvalues[1] {
            (0, 1)
        } else {
            (1, 0)
        };
        // smallest eigenvalue of A^-1 belongs to the major axis
        let major = 1.0 / eig.eigenvalues[imax].sqrt();
        let minor = 1.0 / eig.eigenvalues[imin].sqrt();
        let dir = eig.eigenvectors.column(imax);
        let mut orientation = dir[1].atan2(dir[0]);
        if orientation <= -PI / 2.0 {
            orientation += PI;
        } else if orientation > PI / 2.0 {
            orientation -= PI;
        }
        EllipseAxes {
            major,
            minor,
            orientation,
        }
    }

    pub fn area(&self) -> f64 {
        PI / (self.a * self.b).abs()
    }

    /// `(z - m)^T A^-1 (z - m) - 1`: negative inside, zero on the boundary.
    pub fn implicit(&self, z: &Vector2<f64>) -> f64 {
        self.scaled_implicit(z, 1.0)
    }

    /// `(z - m)^T A^-1 (z - m) - s^2`, the boundary shrunk by `s`.
    pub fn scaled_implicit(&self, z: &Vector2<f64>, s: f64) -> f64 {
        let d = self.chol().transpose() * (z - self.center);
        d.norm_squared() - s * s
    }

    fn inv_chol_t(&self) -> Matrix2<f64> {
        // L^-T for L = [[a, 0], [c, b]]
        Matrix2::new(1.0 / self.a, -self.c / (self.a * self.b), 0.0, 1.0 / self.b)
    }

    /// `m + L^-T (cos t, sin t)`.
    pub fn boundary_point(&self, theta: f64) -> Vector2<f64> {
        let (s, c) = theta.sin_cos();
        self.center + self.inv_chol_t() * Vector2::new(c, s)
    }

    /// Point on the boundary closest to `query` in Euclidean distance.
    ///
    /// Damped Newton iteration on the boundary angle, started from the angle of
    /// `L^T (query - m)`. A 16-angle scan guards against converging into a
    /// non-global stationary point. A query exactly at the center returns the
    /// boundary point at angle zero.
    pub fn closest_point(&self, query: &Vector2<f64>) -> Vector2<f64> {
        let rel = query - self.center;
        if rel.norm_squared() == 0.0 {
            return self.boundary_point(0.0);
        }
        let b = self.inv_chol_t();
        let normalized = self.chol().transpose() * rel;
        let theta0 = normalized[1].atan2(normalized[0]);

        let dist2 = |t: f64| (self.boundary_point(t) - query).norm_squared();
        let mut best = newton_on_angle(&b, &rel, theta0);
        let mut best_d = dist2(best);
        for k in 0..COARSE_ANGLES {
            let t = 2.0 * PI * k as f64 / COARSE_ANGLES as f64;
            if dist2(t) < best_d - 1e-12 {
                let cand = newton_on_angle(&b, &rel, t);
                let cd = dist2(cand);
                if cd < best_d {
                    best = cand;
                    best_d = cd;
                }
            }
        }
        self.boundary_point(best)
    }

    /// First-order optimality residual `(p - q) . dp/dt` at the boundary
    /// point closest to `query` (in angle form).
    pub fn stationarity_residual(&self, query: &Vector2<f64>, point: &Vector2<f64>) -> f64 {
        // recover the angle of `point`
        let n = self.chol().transpose() * (point - self.center);
        let t = n[1].atan2(n[0]);
        let (s, c) = t.sin_cos();
        let tangent = self.inv_chol_t() * Vector2::new(-s, c);
        (point - query).dot(&tangent)
    }
}

/// Minimizes `|B e(t) - rel|^2` over `t`.
fn newton_on_angle(b: &Matrix2<f64>, rel: &Vector2<f64>, mut t: f64) -> f64 {
    let f = |t: f64| {
        let (s, c) = t.sin_cos();
        (b * Vector2::new(c, s) - rel).norm_squared()
    };
    for _ in 0..NEWTON_MAX_ITER {
        let (s, c) = t.sin_cos();
        let p = b * Vector2::new(c, s);
        let dp = b * Vector2::new(-s, c);
        let diff = p - rel;
        let grad = 2.0 * diff.dot(&dp);
        let hess = 2.0 * (dp.norm_squared() - diff.dot(&p));
        let mut step = if hess > 0.0 { -grad / hess } else { -grad.signum() * 0.1 };
        let f0 = f(t);
        let mut accepted = false;
        for _ in 0..30 {
            if f(t + step) <= f0 {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        t += step;
        if step.abs() < NEWTON_TOL {
            break;
        }
    }
    t
}
