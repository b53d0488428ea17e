//! Gaussian densities, the unscented transform and the generic
//! statistical-linearization update used by every shape estimator.
//!
//! Measurement updates here work on an *augmented* Gaussian: the state prior
//! stacked with independent noise terms. Sigma points are drawn jointly over
//! that augmented vector, pushed through a pseudo-measurement map and the
//! resulting moments drive a Kalman-style correction towards a zero
//! pseudo-measurement.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

/// Symmetry tolerance accepted on any emitted covariance.
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Smallest eigenvalue tolerated before a covariance is repaired.
pub const PSD_TOL: f64 = 1e-9;
/// Innovation variances below this are treated as degenerate.
pub const DEGENERATE_INNOVATION: f64 = 1e-12;

const JITTER_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GaussianError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("covariance is not positive semi-definite after jitter (min eigenvalue {min_eigenvalue:e})")]
    Conditioning { min_eigenvalue: f64 },
    #[error("innovation covariance is degenerate (smallest eigenvalue {value:e})")]
    DegenerateInnovation { value: f64 },
    #[error("unscented parameters give non-positive spread n + lambda = {0}")]
    InvalidSpread(f64),
    #[error("empty state")]
    Empty,
}

/// Mean and covariance of a multivariate Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianState {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self, GaussianError> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(GaussianError::DimensionMismatch {
                expected: d,
                got: cov.nrows(),
            });
        }
        Ok(Self { mean, cov })
    }

    pub fn from_diagonal(mean: &[f64], variances: &[f64]) -> Result<Self, GaussianError> {
        if mean.len() != variances.len() {
            return Err(GaussianError::DimensionMismatch {
                expected: mean.len(),
                got: variances.len(),
            });
        }
        Ok(Self {
            mean: DVector::from_column_slice(mean),
            cov: DMatrix::from_diagonal(&DVector::from_column_slice(variances)),
        })
    }

    pub fn scalar(mean: f64, variance: f64) -> Self {
        Self {
            mean: DVector::from_element(1, mean),
            cov: DMatrix::from_element(1, 1, variance),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Block-diagonal stacking of independent Gaussians.
    pub fn stack(parts: &[&GaussianState]) -> GaussianState {
        let d: usize = parts.iter().map(|p| p.dim()).sum();
        let mut mean = DVector::zeros(d);
        let mut cov = DMatrix::zeros(d, d);
        let mut offset = 0;
        for p in parts {
            let n = p.dim();
            mean.rows_mut(offset, n).copy_from(&p.mean);
            cov.view_mut((offset, offset), (n, n)).copy_from(&p.cov);
            offset += n;
        }
        GaussianState { mean, cov }
    }

    pub fn is_finite(&self) -> bool {
        self.mean.iter().all(|v| v.is_finite()) && self.cov.iter().all(|v| v.is_finite())
    }

    /// Largest absolute asymmetry and smallest eigenvalue of the covariance.
    pub fn covariance_health(&self) -> (f64, f64) {
        let asym = (&self.cov - self.cov.transpose()).amax();
        let sym = symmetrize(&self.cov);
        let min_eig = SymmetricEigen::new(sym).eigenvalues.min();
        (asym, min_eig)
    }
}

/// Unscented transform parameters `(alpha, beta, kappa)`.
///
/// `kappa = None` selects `3 - n` for an `n`-dimensional input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnscentedParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: Option<f64>,
}

impl Default for UnscentedParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.0,
            kappa: None,
        }
    }
}

impl UnscentedParams {
    pub fn lambda(&self, n: usize) -> f64 {
        let n = n as f64;
        let kappa = self.kappa.unwrap_or(3.0 - n);
        self.alpha * self.alpha * (n + kappa) - n
    }
}

#[derive(Debug, Clone)]
pub struct SigmaPointSet {
    pub points: Vec<DVector<f64>>,
    pub mean_weights: Vec<f64>,
    pub cov_weights: Vec<f64>,
}

impl SigmaPointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Weighted mean and covariance recomputed from the points.
    pub fn moments(&self) -> GaussianState {
        let d = self.points[0].len();
        let mut mean = DVector::zeros(d);
        for (p, w) in self.points.iter().zip(&self.mean_weights) {
            mean.axpy(*w, p, 1.0);
        }
        let mut cov = DMatrix::zeros(d, d);
        for (p, w) in self.points.iter().zip(&self.cov_weights) {
            let dev = p - &mean;
            cov.ger(*w, &dev, &dev, 1.0);
        }
        GaussianState { mean, cov }
    }
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Symmetrizes the covariance and lifts it back to PSD with a single
/// diagonal jitter if its smallest eigenvalue drops below `-PSD_TOL`.
pub fn repair_covariance(cov: &DMatrix<f64>) -> Result<DMatrix<f64>, GaussianError> {
    let sym = symmetrize(cov);
    let min_eig = SymmetricEigen::new(sym.clone()).eigenvalues.min();
    if !min_eig.is_finite() {
        return Err(GaussianError::Conditioning {
            min_eigenvalue: min_eig,
        });
    }
    if min_eig >= -PSD_TOL {
        return Ok(sym);
    }
    let eps = min_eig.abs() + JITTER_FLOOR;
    let n = sym.nrows();
    let jittered = sym + DMatrix::identity(n, n) * eps;
    let retry = SymmetricEigen::new(jittered.clone()).eigenvalues.min();
    if retry < -PSD_TOL {
        return Err(GaussianError::Conditioning { min_eigenvalue: retry });
    }
    Ok(jittered)
}

/// Lower Cholesky factor, retrying once with a diagonal jitter for
/// semi-definite or round-off indefinite input. Clearly indefinite matrices
/// are rejected.
fn cholesky_with_jitter(m: &DMatrix<f64>) -> Result<DMatrix<f64>, GaussianError> {
    if let Some(ch) = m.clone().cholesky() {
        return Ok(ch.l());
    }
    let scale = m.diagonal().amax().max(1.0);
    let min_eig = SymmetricEigen::new(symmetrize(m)).eigenvalues.min();
    if !(min_eig >= -PSD_TOL * scale) {
        return Err(GaussianError::Conditioning {
            min_eigenvalue: min_eig,
        });
    }
    let eps = min_eig.min(0.0).abs() + JITTER_FLOOR * scale;
    let n = m.nrows();
    (m + DMatrix::identity(n, n) * eps)
        .cholesky()
        .map(|ch| ch.l())
        .ok_or(GaussianError::Conditioning {
            min_eigenvalue: min_eig,
        })
}

/// Symmetric `2n + 1` sigma points of a Gaussian.
pub fn draw_sigma_points(state: &GaussianState, params: UnscentedParams) -> Result<SigmaPointSet, GaussianError> {
    let n = state.dim();
    if n == 0 {
        return Err(GaussianError::Empty);
    }
    let lambda = params.lambda(n);
    let spread = n as f64 + lambda;
    if spread <= 0.0 || !spread.is_finite() {
        return Err(GaussianError::InvalidSpread(spread));
    }
    let root = cholesky_with_jitter(&(symmetrize(&state.cov) * spread))?;

    let mut points = Vec::with_capacity(2 * n + 1);
    points.push(state.mean.clone());
    for i in 0..n {
        points.push(&state.mean + root.column(i));
    }
    for i in 0..n {
        points.push(&state.mean - root.column(i));
    }

    let w = 0.5 / spread;
    let mut mean_weights = vec![w; 2 * n + 1];
    let mut cov_weights = vec![w; 2 * n + 1];
    mean_weights[0] = lambda / spread;
    cov_weights[0] = lambda / spread + (1.0 - params.alpha * params.alpha + params.beta);

    Ok(SigmaPointSet {
        points,
        mean_weights,
        cov_weights,
    })
}

/// Moments of the joint Gaussian approximation of state and predicted
/// pseudo-measurement.
#[derive(Debug, Clone)]
pub struct LinearizedMoments {
    pub predicted: DVector<f64>,
    pub innovation_cov: DMatrix<f64>,
    pub cross_cov: DMatrix<f64>,
}

/// Propagates joint sigma points of `[prior; noise]` through `h` and returns
/// predicted pseudo-measurement mean, its covariance and the state/measurement
/// cross-covariance.
pub fn linearize<H>(
    prior: &GaussianState,
    noise: &GaussianState,
    params: UnscentedParams,
    h: H,
) -> Result<LinearizedMoments, GaussianError>
where
    H: Fn(&DVector<f64>) -> DVector<f64>,
{
    let d = prior.dim();
    let joint = GaussianState::stack(&[prior, noise]);
    let sigma = draw_sigma_points(&joint, params)?;
    let images: Vec<DVector<f64>> = sigma.points.iter().map(&h).collect();
    let m = images[0].len();

    let mut predicted = DVector::zeros(m);
    for (y, w) in images.iter().zip(&sigma.mean_weights) {
        predicted.axpy(*w, y, 1.0);
    }
    let mut innovation_cov = DMatrix::zeros(m, m);
    let mut cross_cov = DMatrix::zeros(d, m);
    for ((x, y), w) in sigma.points.iter().zip(&images).zip(&sigma.cov_weights) {
        let dy = y - &predicted;
        let dx = x.rows(0, d) - &prior.mean;
        innovation_cov.ger(*w, &dy, &dy, 1.0);
        cross_cov.ger(*w, &dx, &dy, 1.0);
    }
    Ok(LinearizedMoments {
        predicted,
        innovation_cov,
        cross_cov,
    })
}

/// Kalman correction of `prior` towards an all-zero pseudo-measurement using
/// sigma-point moments of `h` over the augmented vector `[prior; noise]`.
///
/// `h` must return one entry per stacked pseudo-measurement. A degenerate
/// innovation covariance yields `GaussianError::DegenerateInnovation`; the
/// caller keeps its prior in that case.
pub fn statistical_linearization_update<H>(
    prior: &GaussianState,
    noise: &GaussianState,
    params: UnscentedParams,
    h: H,
) -> Result<GaussianState, GaussianError>
where
    H: Fn(&DVector<f64>) -> DVector<f64>,
{
    let moments = linearize(prior, noise, params, h)?;
    let innov = symmetrize(&moments.innovation_cov);
    let min_eig = if innov.nrows() == 1 {
        innov[(0, 0)]
    } else {
        SymmetricEigen::new(innov.clone()).eigenvalues.min()
    };
    if !(min_eig >= DEGENERATE_INNOVATION) {
        return Err(GaussianError::DegenerateInnovation { value: min_eig });
    }
    let innov_inv = innov
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(GaussianError::DegenerateInnovation { value: min_eig })?;
    let gain = &moments.cross_cov * innov_inv;
    let mean = &prior.mean - &gain * &moments.predicted;
    let cov = &prior.cov - &gain * moments.cross_cov.transpose();
    Ok(GaussianState {
        mean,
        cov: repair_covariance(&cov)?,
    })
}

/// Linear Kalman time update `mean <- A mean`, `cov <- A cov A^T + Q`.
pub fn kalman_predict(
    state: &GaussianState,
    system: &DMatrix<f64>,
    process_noise: &DMatrix<f64>,
) -> Result<GaussianState, GaussianError> {
    let d = state.dim();
    for m in [system, process_noise] {
        if m.nrows() != d || m.ncols() != d {
            return Err(GaussianError::DimensionMismatch {
                expected: d,
                got: m.nrows(),
            });
        }
    }
    let mean = system * &state.mean;
    let cov = system * &state.cov * system.transpose() + process_noise;
    Ok(GaussianState {
        mean,
        cov: symmetrize(&cov),
    })
}
