//! Measurement generation: uniform sources on the target, additive Gaussian
//! sensor noise and per-scan measurement counts.

use nalgebra::{Matrix2, SymmetricEigen, Vector2};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use thiserror::Error;

use super::target::TargetSnapshot;
use crate::shape::{Point, Shape};

/// Attempts allowed before rejection sampling gives up.
pub const MAX_REJECTION_ATTEMPTS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplingError {
    #[error("rejection sampling exceeded {0} attempts; target geometry is malformed")]
    RejectionLimit(usize),
    #[error("target has no members to sample from")]
    Empty,
}

/// One component of a Gaussian noise mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseComponent {
    pub cov: Matrix2<f64>,
    pub probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CountModel {
    Fixed(usize),
    /// `1 + Poisson(mean)`.
    ShiftedPoisson(f64),
}

/// Uniform draw from the target region, or a uniform member of a group.
pub fn sample_measurement_source<R: Rng + ?Sized>(
    target: &TargetSnapshot,
    rng: &mut R,
) -> Result<Point, SamplingError> {
    if let Some(members) = &target.members {
        if members.is_empty() {
            return Err(SamplingError::Empty);
        }
        return Ok(members[rng.random_range(0..members.len())]);
    }
    sample_uniform_in(&target.region, rng)
}

/// Rejection sampling inside the bounding box of `region`.
pub fn sample_uniform_in<R: Rng + ?Sized>(region: &Shape, rng: &mut R) -> Result<Point, SamplingError> {
    let bbox = region.bounding_box();
    let span = bbox.max - bbox.min;
    for _ in 0..MAX_REJECTION_ATTEMPTS {
        let z = bbox.min + Vector2::new(rng.random::<f64>() * span[0], rng.random::<f64>() * span[1]);
        if region.contains(&z) {
            return Ok(z);
        }
    }
    Err(SamplingError::RejectionLimit(MAX_REJECTION_ATTEMPTS))
}

/// `source + w` with `w ~ N(0, noise_cov)`.
pub fn generate_measurement<R: Rng + ?Sized>(source: &Point, noise_cov: &Matrix2<f64>, rng: &mut R) -> Point {
    let eig = SymmetricEigen::new((noise_cov + noise_cov.transpose()) * 0.5);
    let sqrt = eig.eigenvectors * Matrix2::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    let n = Vector2::new(
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
    );
    source + sqrt * n
}

/// Picks a mixture component by its probability.
pub fn sample_noise_cov<R: Rng + ?Sized>(mixture: &[NoiseComponent], rng: &mut R) -> Matrix2<f64> {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for c in mixture {
        acc += c.probability;
        if u < acc {
            return c.cov;
        }
    }
    mixture.last().expect("non-empty mixture").cov
}

pub fn measurement_count<R: Rng + ?Sized>(model: &CountModel, rng: &mut R) -> usize {
    match *model {
        CountModel::Fixed(n) => n,
        CountModel::ShiftedPoisson(mean) => {
            let extra = if mean > 0.0 {
                Poisson::new(mean).expect("positive mean").sample(rng) as usize
            } else {
                0
            };
            1 + extra
        }
    }
}
