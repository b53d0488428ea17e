//! Random hypersurface model trackers for elliptic and star-convex shapes.
//!
//! The state vector is laid out as `[center (2); velocity (2, optional);
//! shape parameters]`. Each measurement contributes an augmented noise block
//! `[v (2); scaling (1)]` and one scalar pseudo-measurement whose observed value
//! is zero.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use thiserror::Error;

use crate::ellipse::EllipseParams;
use crate::gaussian::{self, GaussianError, GaussianState, UnscentedParams};
use crate::shape::Shape;
use crate::starconvex::{angle_point_estimate, fourier_basis, FourierShapeParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
    #[error("state layout mismatch: expected dimension {expected}, got {got}")]
    Layout { expected: usize, got: usize },
    #[error("batch update needs at least one measurement")]
    EmptyBatch,
    #[error("{0} measurements but {1} noise covariances")]
    NoiseCountMismatch(usize, usize),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeFamily {
    Ellipse,
    StarConvex,
}

/// Which quantity the Gaussian scaling-factor model describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingVariable {
    /// `u = s^2`, enters the ellipse pseudo-measurement linearly.
    SquaredScale,
    /// `s` itself, used by the star-convex pseudo-measurement.
    Scale,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingModel {
    pub variable: ScalingVariable,
    pub mean: f64,
    pub variance: f64,
}

impl ScalingModel {
    pub fn new(variable: ScalingVariable, mean: f64, variance: f64) -> Result<Self, FilterError> {
        if !(variance > 0.0) || !mean.is_finite() || !variance.is_finite() {
            return Err(FilterError::Config(format!(
                "scaling variance must be positive and finite, got {variance}"
            )));
        }
        Ok(Self {
            variable,
            mean,
            variance,
        })
    }

    /// First two moments of U[0, 1] for the squared scale.
    pub fn squared_scale() -> Self {
        Self {
            variable: ScalingVariable::SquaredScale,
            mean: 0.5,
            variance: 1.0 / 12.0,
        }
    }

    pub fn scale() -> Self {
        Self {
            variable: ScalingVariable::Scale,
            mean: 0.7,
            variance: 0.06,
        }
    }

    pub fn default_for(family: ShapeFamily) -> Self {
        match family {
            ShapeFamily::Ellipse => Self::squared_scale(),
            ShapeFamily::StarConvex => Self::scale(),
        }
    }
}

/// Scalar Gaussian of the scaling term stacked into the augmented state.
pub fn scaling_noise_gaussian(model: &ScalingModel) -> GaussianState {
    GaussianState::scalar(model.mean, model.variance)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionModel {
    StaticRandomWalk,
    ConstantVelocity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsSpec {
    pub model: MotionModel,
    /// Sampling period.
    pub t: f64,
    /// Shape random-walk intensity.
    pub q1: f64,
    /// Kinematic process-noise intensity.
    pub q2: f64,
}

impl DynamicsSpec {
    pub fn stationary() -> Self {
        Self {
            model: MotionModel::StaticRandomWalk,
            t: 1.0,
            q1: 0.0,
            q2: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        if !(self.t > 0.0) || !(self.q1 >= 0.0) || !(self.q2 >= 0.0) {
            return Err(FilterError::Config(format!(
                "dynamics need T > 0, q1 >= 0, q2 >= 0 (got T={}, q1={}, q2={})",
                self.t, self.q1, self.q2
            )));
        }
        Ok(())
    }

    pub fn has_velocity(&self) -> bool {
        self.model == MotionModel::ConstantVelocity
    }
}

/// Index bookkeeping for `[center; velocity?; shape]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub has_velocity: bool,
    pub shape_dim: usize,
}

impl StateLayout {
    pub fn dim(&self) -> usize {
        self.shape_offset() + self.shape_dim
    }

    pub fn shape_offset(&self) -> usize {
        if self.has_velocity {
            4
        } else {
            2
        }
    }

    pub fn center(&self, x: &[f64]) -> Vector2<f64> {
        Vector2::new(x[0], x[1])
    }

    pub fn velocity(&self, x: &[f64]) -> Option<Vector2<f64>> {
        self.has_velocity.then(|| Vector2::new(x[2], x[3]))
    }

    pub fn shape<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[self.shape_offset()..self.dim()]
    }

    pub fn check(&self, state: &GaussianState) -> Result<(), FilterError> {
        if state.dim() != self.dim() {
            return Err(FilterError::Layout {
                expected: self.dim(),
                got: state.dim(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub shape_family: ShapeFamily,
    /// Number of harmonics `N_F`; the star-convex shape has `2 N_F + 1` coefficients.
    pub n_fourier: usize,
    pub scaling: ScalingModel,
    pub trace_normalize: bool,
    pub batch_mode: bool,
    pub unscented: UnscentedParams,
    pub dynamics: DynamicsSpec,
}

impl TrackerConfig {
    pub fn ellipse() -> Self {
        Self {
            shape_family: ShapeFamily::Ellipse,
            n_fourier: 0,
            scaling: ScalingModel::squared_scale(),
            trace_normalize: true,
            batch_mode: false,
            unscented: UnscentedParams::default(),
            dynamics: DynamicsSpec::stationary(),
        }
    }

    pub fn star_convex(n_fourier: usize) -> Self {
        Self {
            shape_family: ShapeFamily::StarConvex,
            n_fourier,
            scaling: ScalingModel::scale(),
            ..Self::ellipse()
        }
    }

    pub fn shape_dim(&self) -> usize {
        match self.shape_family {
            ShapeFamily::Ellipse => 3,
            ShapeFamily::StarConvex => 2 * self.n_fourier + 1,
        }
    }

    pub fn layout(&self) -> StateLayout {
        StateLayout {
            has_velocity: self.dynamics.has_velocity(),
            shape_dim: self.shape_dim(),
        }
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        self.dynamics.validate()?;
        ScalingModel::new(self.scaling.variable, self.scaling.mean, self.scaling.variance)?;
        let expected = match self.shape_family {
            ShapeFamily::Ellipse => ScalingVariable::SquaredScale,
            ShapeFamily::StarConvex => ScalingVariable::Scale,
        };
        if self.scaling.variable != expected {
            return Err(FilterError::Config(format!(
                "{:?} trackers model the scaling factor as {:?}",
                self.shape_family, expected
            )));
        }
        if self.shape_family == ShapeFamily::StarConvex && self.n_fourier < 1 {
            return Err(FilterError::Config("star-convex trackers need n_fourier >= 1".into()));
        }
        Ok(())
    }

    /// Shape encoded by a state vector under this configuration.
    pub fn shape_of(&self, x: &[f64]) -> Shape {
        let layout = self.layout();
        let center = layout.center(x);
        let p = layout.shape(x);
        match self.shape_family {
            ShapeFamily::Ellipse => Shape::Ellipse(EllipseParams::new(center, p[0], p[1], p[2])),
            ShapeFamily::StarConvex => Shape::StarConvex(
                FourierShapeParams::new(center, DVector::from_column_slice(p))
                    .expect("layout guarantees an odd coefficient count"),
            ),
        }
    }
}

/// Ellipse pseudo-measurement for the augmented vector `[x; v; u]`.
///
/// Evaluates `(y - m)^T L L^T (y - m) - 2 o^T L L^T v - v^T L L^T v - u`
/// where `o` is the fixed source-estimate offset from the center. With
/// `trace_normalize` the result is divided by `tr(L L^T)`.
pub fn ellipse_pseudo_measurement(
    augmented: &[f64],
    layout: &StateLayout,
    measurement: &Vector2<f64>,
    source_offset: &Vector2<f64>,
    trace_normalize: bool,
) -> f64 {
    let d = layout.dim();
    let center = layout.center(augmented);
    let p = layout.shape(augmented);
    let v = Vector2::new(augmented[d], augmented[d + 1]);
    let u = augmented[d + 2];
    ellipse_residual(&center, p, &v, u, measurement, source_offset, trace_normalize)
}

fn ellipse_residual(
    center: &Vector2<f64>,
    p: &[f64],
    v: &Vector2<f64>,
    u: f64,
    y: &Vector2<f64>,
    offset: &Vector2<f64>,
    trace_normalize: bool,
) -> f64 {
    let (a, b, c) = (p[0], p[1], p[2]);
    let l = Matrix2::new(a, 0.0, c, b);
    let inv_shape = l * l.transpose();
    let dy = y - center;
    let h = dy.dot(&(inv_shape * dy)) - 2.0 * offset.dot(&(inv_shape * v)) - v.dot(&(inv_shape * v)) - u;
    if trace_normalize {
        h / (a * a + b * b + c * c)
    } else {
        h
    }
}

/// Star-convex pseudo-measurement for the augmented vector `[x; v; s]`:
/// `s^2 r^2 + 2 s r e^T v + |v|^2 - |y - m|^2` with `r = R(phi) p` and
/// `e = (cos phi, sin phi)`.
pub fn sc_pseudo_measurement(augmented: &[f64], layout: &StateLayout, measurement: &Vector2<f64>, phi_hat: f64) -> f64 {
    let basis = fourier_basis(phi_hat, layout.shape_dim).expect("odd coefficient count");
    let d = layout.dim();
    sc_residual(
        augmented,
        &augmented[d..d + 3],
        layout,
        measurement,
        phi_hat,
        basis.as_slice(),
    )
}

fn sc_residual(x: &[f64], noise: &[f64], layout: &StateLayout, y: &Vector2<f64>, phi_hat: f64, basis: &[f64]) -> f64 {
    let center = layout.center(x);
    let p = layout.shape(x);
    let v = Vector2::new(noise[0], noise[1]);
    let s = noise[2];
    let r: f64 = basis.iter().zip(p).map(|(b, c)| b * c).sum();
    let e = Vector2::new(phi_hat.cos(), phi_hat.sin());
    s * s * r * r + 2.0 * s * r * e.dot(&v) + v.norm_squared() - (y - center).norm_squared()
}

/// Result of a measurement update.
#[derive(Debug, Clone)]
pub struct UpdateOutcome {
    pub state: GaussianState,
    /// The innovation covariance was degenerate; `state` is the unchanged prior.
    pub degenerate: bool,
    /// Star-convex angle estimates that fell back to 0 (measurement at the center).
    pub degenerate_angles: usize,
    /// The prior-mean ellipse needed diagonal repair to compute source estimates.
    pub repaired_source_ellipse: bool,
}

/// Single-measurement update against pseudo-measurement 0.
pub fn measurement_update(
    prior: &GaussianState,
    measurement: &Vector2<f64>,
    noise_cov: &Matrix2<f64>,
    config: &TrackerConfig,
) -> Result<UpdateOutcome, FilterError> {
    batch_update(
        prior,
        std::slice::from_ref(measurement),
        std::slice::from_ref(noise_cov),
        config,
    )
}

/// Augmented noise Gaussian for `n` measurements: `[v_1; s_1; ...; v_n; s_n]`.
pub fn augmented_noise(noise_covs: &[Matrix2<f64>], scaling: &ScalingModel) -> GaussianState {
    let n = noise_covs.len();
    let mut mean = DVector::zeros(3 * n);
    let mut cov = DMatrix::zeros(3 * n, 3 * n);
    for (i, c) in noise_covs.iter().enumerate() {
        let o = 3 * i;
        cov.view_mut((o, o), (2, 2)).copy_from(c);
        mean[o + 2] = scaling.mean;
        cov[(o + 2, o + 2)] = scaling.variance;
    }
    GaussianState { mean, cov }
}

/// Joint update with all measurements stacked into one pseudo-measurement
/// vector of zeros.
pub fn batch_update(
    prior: &GaussianState,
    measurements: &[Vector2<f64>],
    noise_covs: &[Matrix2<f64>],
    config: &TrackerConfig,
) -> Result<UpdateOutcome, FilterError> {
    if measurements.is_empty() {
        return Err(FilterError::EmptyBatch);
    }
    if measurements.len() != noise_covs.len() {
        return Err(FilterError::NoiseCountMismatch(measurements.len(), noise_covs.len()));
    }
    let layout = config.layout();
    layout.check(prior)?;
    let d = layout.dim();
    let noise = augmented_noise(noise_covs, &config.scaling);
    let prior_center = layout.center(prior.mean.as_slice());

    let mut degenerate_angles = 0;
    let mut repaired_source_ellipse = false;

    let result = match config.shape_family {
        ShapeFamily::Ellipse => {
            let p = layout.shape(prior.mean.as_slice());
            let mut source_ellipse = EllipseParams::new(prior_center, p[0], p[1], p[2]);
            repaired_source_ellipse = source_ellipse.repair();
            let offsets: Vec<Vector2<f64>> = measurements
                .iter()
                .map(|y| source_ellipse.closest_point(y) - prior_center)
                .collect();
            let normalize = config.trace_normalize;
            gaussian::statistical_linearization_update(prior, &noise, config.unscented, |aug| {
                let x = aug.as_slice();
                let center = layout.center(x);
                let p = layout.shape(x);
                DVector::from_iterator(
                    measurements.len(),
                    measurements.iter().zip(&offsets).enumerate().map(|(i, (y, o))| {
                        let k = d + 3 * i;
                        let v = Vector2::new(x[k], x[k + 1]);
                        ellipse_residual(&center, p, &v, x[k + 2], y, o, normalize)
                    }),
                )
            })
        }
        ShapeFamily::StarConvex => {
            let angles: Vec<f64> = measurements
                .iter()
                .map(|y| {
                    let est = angle_point_estimate(y, &prior_center);
                    degenerate_angles += usize::from(est.degenerate);
                    est.angle
                })
                .collect();
            let bases: Vec<DVector<f64>> = angles
                .iter()
                .map(|phi| fourier_basis(*phi, layout.shape_dim))
                .collect::<Result<_, _>>()
                .map_err(|e| FilterError::Config(e.to_string()))?;
            gaussian::statistical_linearization_update(prior, &noise, config.unscented, |aug| {
                let x = aug.as_slice();
                DVector::from_iterator(
                    measurements.len(),
                    measurements.iter().enumerate().map(|(i, y)| {
                        let noise_block = &x[d + 3 * i..d + 3 * i + 3];
                        sc_residual(x, noise_block, &layout, y, angles[i], bases[i].as_slice())
                    }),
                )
            })
        }
    };

    match result {
        Ok(state) => Ok(UpdateOutcome {
            state,
            degenerate: false,
            degenerate_angles,
            repaired_source_ellipse,
        }),
        Err(GaussianError::DegenerateInnovation { .. }) => Ok(UpdateOutcome {
            state: prior.clone(),
            degenerate: true,
            degenerate_angles,
            repaired_source_ellipse,
        }),
        Err(e) => Err(e.into()),
    }
}

/// System matrix and process noise for the given dynamics and layout.
pub fn transition_matrices(dynamics: &DynamicsSpec, shape_dim: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    match dynamics.model {
        MotionModel::StaticRandomWalk => {
            let n = 2 + shape_dim;
            (DMatrix::identity(n, n), DMatrix::identity(n, n) * dynamics.q1)
        }
        MotionModel::ConstantVelocity => {
            let n = 4 + shape_dim;
            let t = dynamics.t;
            let mut a = DMatrix::identity(n, n);
            a[(0, 2)] = t;
            a[(1, 3)] = t;
            let mut q = DMatrix::zeros(n, n);
            let q2 = dynamics.q2;
            for i in 0..2 {
                q[(i, i)] = q2 * t.powi(3) / 3.0;
                q[(i, i + 2)] = q2 * t.powi(2) / 2.0;
                q[(i + 2, i)] = q2 * t.powi(2) / 2.0;
                q[(i + 2, i + 2)] = q2 * t;
            }
            for i in 4..n {
                q[(i, i)] = dynamics.q1;
            }
            (a, q)
        }
    }
}

/// Linear prediction with a constant-velocity (or static) center and a
/// random-walk shape.
pub fn time_update(
    state: &GaussianState,
    dynamics: &DynamicsSpec,
    shape_dim: usize,
) -> Result<GaussianState, FilterError> {
    let layout = StateLayout {
        has_velocity: dynamics.has_velocity(),
        shape_dim,
    };
    layout.check(state)?;
    let (a, q) = transition_matrices(dynamics, shape_dim);
    Ok(gaussian::kalman_predict(state, &a, &q)?)
}

/// Counters for conditions the filter repairs or skips instead of failing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub degenerate_updates: usize,
    pub degenerate_angles: usize,
    pub ellipse_repairs: usize,
    /// Ellipse states whose sign convention was flipped back to `a, b > 0`.
    pub sign_flips: usize,
}

/// Brings an ellipse state to the convention `a, b > 0` by negating `(a, c)`
/// and/or `b` in the mean. The negation is a linear change of variables that
/// maps each ellipse to itself, so the covariance transforms exactly.
pub fn canonicalize_ellipse_state(state: &mut GaussianState, layout: &StateLayout) -> bool {
    let o = layout.shape_offset();
    let mut sign = DVector::from_element(layout.dim(), 1.0);
    if state.mean[o] < 0.0 {
        sign[o] = -1.0;
        sign[o + 2] = -1.0;
    }
    if state.mean[o + 1] < 0.0 {
        sign[o + 1] = -1.0;
    }
    if sign.iter().all(|s| *s > 0.0) {
        return false;
    }
    state.mean.component_mul_assign(&sign);
    for ((i, j), v) in state
        .cov
        .iter_mut()
        .enumerate()
        .map(|(k, v)| ((k % layout.dim(), k / layout.dim()), v))
    {
        *v *= sign[i] * sign[j];
    }
    true
}

/// Recursive tracker: a Gaussian state plus its configuration.
#[derive(Debug, Clone)]
pub struct Tracker {
    pub config: TrackerConfig,
    pub state: GaussianState,
    pub diagnostics: Diagnostics,
}

impl Tracker {
    pub fn new(config: TrackerConfig, prior: GaussianState) -> Result<Self, FilterError> {
        config.validate()?;
        config.layout().check(&prior)?;
        Ok(Self {
            config,
            state: prior,
            diagnostics: Diagnostics::default(),
        })
    }

    pub fn predict(&mut self) -> Result<(), FilterError> {
        self.state = time_update(&self.state, &self.config.dynamics, self.config.shape_dim())?;
        Ok(())
    }

    /// Incorporates one scan, sequentially or stacked depending on the config.
    pub fn update(&mut self, measurements: &[Vector2<f64>], noise_covs: &[Matrix2<f64>]) -> Result<(), FilterError> {
        if measurements.is_empty() {
            return Ok(());
        }
        if self.config.batch_mode {
            let out = batch_update(&self.state, measurements, noise_covs, &self.config)?;
            self.absorb(out);
        } else {
            if measurements.len() != noise_covs.len() {
                return Err(FilterError::NoiseCountMismatch(measurements.len(), noise_covs.len()));
            }
            for (y, c) in measurements.iter().zip(noise_covs) {
                let out = measurement_update(&self.state, y, c, &self.config)?;
                self.absorb(out);
            }
        }
        Ok(())
    }

    fn absorb(&mut self, out: UpdateOutcome) {
        self.diagnostics.degenerate_updates += usize::from(out.degenerate);
        self.diagnostics.degenerate_angles += out.degenerate_angles;
        self.diagnostics.ellipse_repairs += usize::from(out.repaired_source_ellipse);
        self.state = out.state;
        if self.config.shape_family == ShapeFamily::Ellipse {
            let flipped = canonicalize_ellipse_state(&mut self.state, &self.config.layout());
            self.diagnostics.sign_flips += usize::from(flipped);
        }
    }

    pub fn shape(&self) -> Shape {
        self.config.shape_of(self.state.mean.as_slice())
    }
}
