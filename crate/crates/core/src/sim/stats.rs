//! Scaling-factor extraction and a one-sample Kolmogorov-Smirnov test against
//! U[0, 1], used to check that uniform surface sources give uniform squared
//! scaling factors.

use super::target::polygon_radius;
use crate::shape::{Point, Shape};

/// Squared scaling factor of `z` relative to `center`: the squared ratio of
/// its distance to the boundary distance along the same ray.
pub fn squared_scaling_factor(region: &Shape, center: &Point, z: &Point) -> f64 {
    let d = z - center;
    let phi = d[1].atan2(d[0]);
    let boundary = match region {
        Shape::Ellipse(e) => {
            let u = nalgebra::Vector2::new(phi.cos(), phi.sin());
            1.0 / u.dot(&(e.inverse_shape() * u)).sqrt()
        }
        Shape::StarConvex(f) => f.radius(phi),
        Shape::Polygon(v) => polygon_radius(v, center, phi),
    };
    (d.norm() / boundary).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

impl KsResult {
    pub fn passes(&self, significance: f64) -> bool {
        self.p_value > significance
    }
}

/// One-sample KS test of `samples` against the uniform distribution on [0, 1].
pub fn ks_uniform(samples: &[f64]) -> KsResult {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let statistic = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = x.clamp(0.0, 1.0);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    KsResult {
        statistic,
        p_value: kolmogorov_survival((n.sqrt() + 0.12 + 0.11 / n.sqrt()) * statistic),
    }
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn survival_reference_values() {
        // classical critical values: 1.358 at 5%, 1.628 at 1%
        assert!((kolmogorov_survival(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_survival(1.628) - 0.01).abs() < 5e-4);
    }

    #[test]
    fn uniform_passes_and_square_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u: Vec<f64> = (0..20_000).map(|_| rng.random()).collect();
        assert!(ks_uniform(&u).passes(0.01));
        let sq: Vec<f64> = u.iter().map(|x| x * x).collect();
        assert!(!ks_uniform(&sq).passes(0.01));
    }
}
