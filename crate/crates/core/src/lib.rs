//! Extended object tracking with random hypersurface models.
//!
//! A random hypersurface model places every measurement source on a randomly
//! scaled copy of the target boundary. Writing that relation as an implicit
//! equation in the measurement, the shape parameters, the sensor noise and the
//! scaling factor gives a pseudo-measurement that a sigma-point Gaussian filter
//! can process directly.
//!
//! Modules:
//! - [`gaussian`]: Gaussian states, sigma points, statistical linearization.
//! - [`ellipse`] and [`starconvex`]: shape parameterizations and implicit functions.
//! - [`filter`]: pseudo-measurements, measurement and time updates, [`filter::Tracker`].
//! - [`sim`]: ground-truth targets, measurement generation, Monte-Carlo scenarios.
//! - [`config`] and [`output`]: scenario files and CSV/SVG results.

// `!(x >= y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod ellipse;
pub mod filter;
pub mod gaussian;
pub mod output;
pub mod shape;
pub mod sim;
pub mod starconvex;

pub use ellipse::EllipseParams;
pub use filter::{
    batch_update, measurement_update, time_update, DynamicsSpec, MotionModel, ScalingModel, ScalingVariable,
    ShapeFamily, Tracker, TrackerConfig,
};
pub use gaussian::{GaussianState, UnscentedParams};
pub use shape::{shape_iou, Shape};
pub use starconvex::FourierShapeParams;
