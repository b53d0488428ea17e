use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use proptest::prelude::*;
use rhm_core::filter::{
    augmented_noise, batch_update, ellipse_pseudo_measurement, measurement_update, Tracker, TrackerConfig,
};
use rhm_core::gaussian::GaussianState;
use rhm_core::{EllipseParams, FourierShapeParams};

fn ellipse() -> impl Strategy<Value = EllipseParams> {
    (-5.0f64..5.0, -5.0f64..5.0, 0.3f64..3.0, 0.3f64..3.0, -2.0f64..2.0)
        .prop_map(|(x, y, a, b, c)| EllipseParams::new(Vector2::new(x, y), a, b, c))
}

/// Fourier coefficients whose harmonics cannot outweigh the constant term.
fn fourier_shape(n_coeffs: usize) -> impl Strategy<Value = FourierShapeParams> {
    (
        -5.0f64..5.0,
        -5.0f64..5.0,
        1.0f64..6.0,
        prop::collection::vec(-1.0f64..1.0, n_coeffs - 1),
    )
        .prop_map(move |(x, y, a0, rest)| {
            let budget = 0.4 * a0 / (n_coeffs as f64);
            let mut coeffs = vec![a0];
            coeffs.extend(rest.iter().map(|v| v * budget));
            FourierShapeParams::new(Vector2::new(x, y), DVector::from_vec(coeffs)).unwrap()
        })
}

proptest! {
    #[test]
    fn ellipse_boundary_points_lie_on_the_boundary(e in ellipse(), theta in 0.0f64..2.0 * PI) {
        prop_assert!(e.implicit(&e.boundary_point(theta)).abs() <= 1e-12);
    }

    #[test]
    fn ellipse_scaled_boundary_identity(e in ellipse(), theta in 0.0f64..2.0 * PI, s in 1e-3f64..=1.0) {
        let z = e.center + s * (e.boundary_point(theta) - e.center);
        prop_assert!(e.scaled_implicit(&z, s).abs() <= 1e-12);
    }

    #[test]
    fn closest_point_is_on_the_boundary(e in ellipse(), qx in -10.0f64..10.0, qy in -10.0f64..10.0) {
        let p = e.closest_point(&Vector2::new(qx, qy));
        prop_assert!(e.implicit(&p).abs() < 1e-10);
    }

    #[test]
    fn ellipse_sign_trichotomy(e in ellipse(), theta in 0.0f64..2.0 * PI, t in 0.0f64..3.0) {
        prop_assume!((t - 1.0).abs() > 1e-6);
        let z = e.center + t * (e.boundary_point(theta) - e.center);
        let g = e.implicit(&z);
        if t < 1.0 {
            prop_assert!(g < 0.0);
        } else {
            prop_assert!(g > 0.0);
        }
    }

    #[test]
    fn star_convex_boundary_points_lie_on_the_boundary(f in fourier_shape(11), phi in -PI..PI) {
        prop_assert!(f.implicit(&f.boundary_point(phi)).abs() <= 1e-10);
    }

    #[test]
    fn star_convex_scaled_boundary_identity(f in fourier_shape(15), phi in -PI..PI, s in 1e-3f64..=1.0) {
        let z = f.center + s * f.radius(phi) * Vector2::new(phi.cos(), phi.sin());
        prop_assert!(f.scaled_implicit(&z, s).abs() <= 1e-10);
    }

    #[test]
    fn radius_is_periodic(f in fourier_shape(9), phi in -10.0f64..10.0) {
        prop_assert!((f.radius(phi) - f.radius(phi + 2.0 * PI)).abs() <= 1e-9);
    }

    #[test]
    fn trace_normalization_rescales_the_residual(
        e in ellipse(),
        yx in -8.0f64..8.0,
        yy in -8.0f64..8.0,
        ox in -2.0f64..2.0,
        oy in -2.0f64..2.0,
        u in 0.0f64..1.0,
    ) {
        let layout = TrackerConfig::ellipse().layout();
        let aug = [e.center[0], e.center[1], e.a, e.b, e.c, 0.0, 0.0, u];
        let (y, o) = (Vector2::new(yx, yy), Vector2::new(ox, oy));
        let on = ellipse_pseudo_measurement(&aug, &layout, &y, &o, true);
        let off = ellipse_pseudo_measurement(&aug, &layout, &y, &o, false);
        let trace = (e.chol() * e.chol().transpose()).trace();
        prop_assert!((on - off / trace).abs() <= 1e-12 * off.abs().max(1.0));
    }
}

fn ellipse_prior() -> GaussianState {
    GaussianState::from_diagonal(&[0.5, 0.5, 1.6, 1.6, 0.6], &[3.0, 3.0, 0.5, 0.5, 0.5]).unwrap()
}

#[test]
fn augmented_noise_is_independent_of_the_state() {
    let covs = [Matrix2::new(0.04, 0.01, 0.01, 0.05), Matrix2::identity() * 0.16];
    let config = TrackerConfig::ellipse();
    let noise = augmented_noise(&covs, &config.scaling);
    let prior = ellipse_prior();
    let joint = GaussianState::stack(&[&prior, &noise]);
    let d = prior.dim();
    assert_eq!(joint.cov.view((0, d), (d, noise.dim())), DMatrix::zeros(d, noise.dim()));
    assert_eq!(joint.cov.view((d, 0), (noise.dim(), d)), DMatrix::zeros(noise.dim(), d));
    for (i, c) in covs.iter().enumerate() {
        assert_eq!(noise.cov.fixed_view::<2, 2>(3 * i, 3 * i).into_owned(), *c);
        assert_eq!(noise.mean[3 * i + 2], config.scaling.mean);
        assert_eq!(noise.cov[(3 * i + 2, 3 * i + 2)], config.scaling.variance);
    }
}

#[test]
fn posterior_covariances_stay_symmetric_psd() {
    let mut tracker = Tracker::new(TrackerConfig::star_convex(7), {
        let mut mean = vec![0.5, 0.5, 3.0];
        mean.extend([0.0; 14]);
        let mut var = vec![0.7, 0.7];
        var.extend([0.1; 15]);
        GaussianState::from_diagonal(&mean, &var).unwrap()
    })
    .unwrap();
    let noise = Matrix2::identity() * 0.09;
    for k in 0..200 {
        let phi = k as f64 * 2.399;
        let r = 1.0 + 0.5 * (3.0 * phi).cos().abs() * (k % 7) as f64 / 7.0;
        let y = Vector2::new(r * phi.cos(), r * phi.sin());
        tracker.update(&[y], &[noise]).unwrap();
        let (asym, min_eig) = tracker.state.covariance_health();
        assert!(asym <= 1e-9 && min_eig >= -1e-9, "step {k}: {asym} {min_eig}");
    }
}

#[test]
fn single_measurement_batch_equals_sequential() {
    let prior = ellipse_prior();
    let config = TrackerConfig::ellipse();
    let y = Vector2::new(1.2, -0.4);
    let c = Matrix2::identity() * 0.36;
    let seq = measurement_update(&prior, &y, &c, &config).unwrap();
    let batch = batch_update(&prior, &[y], &[c], &config).unwrap();
    assert_eq!(seq.state, batch.state);
}
