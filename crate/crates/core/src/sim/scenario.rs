//! Monte-Carlo execution of a tracking scenario.
//!
//! Each run owns a ChaCha8 stream selected by its run index under the master
//! seed, so results do not depend on how runs are scheduled across threads.
//! Per-run results are merged in run order.

use nalgebra::{DVector, Matrix2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use super::sampling::{
    generate_measurement, measurement_count, sample_measurement_source, sample_noise_cov, CountModel, NoiseComponent,
    SamplingError,
};
use super::target::GroundTruthTarget;
use crate::filter::{Diagnostics, FilterError, Tracker, TrackerConfig};
use crate::gaussian::GaussianState;
use crate::shape::{shape_iou, Point};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub target: GroundTruthTarget,
    pub noise_mixture: Vec<NoiseComponent>,
    pub count_model: CountModel,
    pub n_steps: usize,
    pub n_runs: usize,
    pub prior: GaussianState,
    pub tracker: TrackerConfig,
    pub rng_seed: u64,
    /// Steps excluded from the trajectory RMSE.
    pub burn_in: usize,
    /// Steps rendered as plots; steps past `n_steps` are skipped and an
    /// empty selection means the final step.
    pub snapshots: Vec<usize>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.n_runs == 0 {
            return Err(ScenarioError::Invalid("n_runs must be at least 1".into()));
        }
        if self.noise_mixture.is_empty() {
            return Err(ScenarioError::Invalid("noise mixture is empty".into()));
        }
        let total: f64 = self.noise_mixture.iter().map(|c| c.probability).sum();
        if (total - 1.0).abs() > 1e-9 || self.noise_mixture.iter().any(|c| !(c.probability >= 0.0)) {
            return Err(ScenarioError::Invalid(format!(
                "mixture probabilities must be non-negative and sum to 1, got {total}"
            )));
        }
        for c in &self.noise_mixture {
            let sym = (c.cov + c.cov.transpose()) * 0.5;
            let eig = sym.symmetric_eigenvalues();
            if (c.cov - c.cov.transpose()).amax() > 1e-12 || eig.min() < 0.0 {
                return Err(ScenarioError::Invalid("noise covariance must be symmetric PSD".into()));
            }
        }
        if let CountModel::ShiftedPoisson(m) = self.count_model {
            if !(m >= 0.0) || !m.is_finite() {
                return Err(ScenarioError::Invalid(format!("poisson mean must be >= 0, got {m}")));
            }
        }
        self.tracker.validate()?;
        self.tracker.layout().check(&self.prior)?;
        let (asym, min_eig) = self.prior.covariance_health();
        if asym > 1e-9 || min_eig < -1e-9 {
            return Err(ScenarioError::Invalid("prior covariance must be symmetric PSD".into()));
        }
        if self.snapshots.contains(&0) {
            return Err(ScenarioError::Invalid("snapshot steps start at 1".into()));
        }
        Ok(())
    }

    /// Snapshot steps within `1..=n_steps`, or the final step if none remain.
    pub fn snapshot_steps(&self) -> Vec<usize> {
        let steps: Vec<usize> = self.snapshots.iter().copied().filter(|s| *s <= self.n_steps).collect();
        if steps.is_empty() && self.n_steps > 0 {
            vec![self.n_steps]
        } else {
            steps
        }
    }
}

/// Everything recorded for one Monte-Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    /// Posterior mean after each step; NaN after divergence.
    pub estimates: Vec<DVector<f64>>,
    pub iou: Vec<f64>,
    /// Distance between the area centroids of the estimated and true regions.
    pub center_error: Vec<f64>,
    pub measurements: Vec<Vec<Point>>,
    /// Step (1-based) at which the run was aborted.
    pub diverged_at: Option<usize>,
    pub diagnostics: Diagnostics,
}

impl RunRecord {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }
}

/// Cross-run statistics for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSummary {
    pub step: usize,
    /// Mean over non-diverged runs of the posterior means.
    pub mean_state: DVector<f64>,
    /// IoU of the shape given by `mean_state` against the truth.
    pub iou_of_mean: f64,
    /// Mean of the per-run IoUs.
    pub mean_iou: f64,
    pub center_rmse: f64,
    pub valid_runs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub name: String,
    pub prior_mean: DVector<f64>,
    pub runs: Vec<RunRecord>,
    pub summary: Vec<StepSummary>,
    pub truth_centers: Vec<Point>,
    pub diverged_runs: usize,
}

impl RunReport {
    pub fn final_summary(&self) -> Option<&StepSummary> {
        self.summary.last()
    }

    /// Center RMSE over the steps after `burn_in`, computed per valid run
    /// and averaged over runs.
    pub fn center_rmse_after(&self, burn_in: usize) -> f64 {
        let per_run: Vec<f64> = self
            .runs
            .iter()
            .filter(|r| !r.diverged() && r.center_error.len() > burn_in)
            .map(|r| {
                let tail = &r.center_error[burn_in..];
                (tail.iter().map(|e| e * e).sum::<f64>() / tail.len() as f64).sqrt()
            })
            .collect();
        if per_run.is_empty() {
            f64::NAN
        } else {
            per_run.iter().sum::<f64>() / per_run.len() as f64
        }
    }

    /// Center RMSE after `burn_in` pooled over all valid runs and steps.
    pub fn pooled_center_rmse_after(&self, burn_in: usize) -> f64 {
        let errors: Vec<f64> = self
            .runs
            .iter()
            .filter(|r| !r.diverged())
            .flat_map(|r| r.center_error.iter().skip(burn_in).copied())
            .collect();
        if errors.is_empty() {
            f64::NAN
        } else {
            (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt()
        }
    }
}

/// Per-run RNG: the run index selects a ChaCha stream under the master seed.
pub fn run_rng(seed: u64, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    rng
}

fn execute_run(config: &ScenarioConfig, run: usize) -> Result<RunRecord, ScenarioError> {
    let mut rng = run_rng(config.rng_seed, run);
    let mut tracker = Tracker::new(config.tracker.clone(), config.prior.clone())?;
    let dim = config.prior.dim();
    let mut record = RunRecord {
        estimates: Vec::with_capacity(config.n_steps),
        iou: Vec::with_capacity(config.n_steps),
        center_error: Vec::with_capacity(config.n_steps),
        measurements: Vec::with_capacity(config.n_steps),
        diverged_at: None,
        diagnostics: Diagnostics::default(),
    };
    for k in 0..config.n_steps {
        let truth = config.target.snapshot(k);
        let n = measurement_count(&config.count_model, &mut rng);
        let mut ys = Vec::with_capacity(n);
        let mut covs: Vec<Matrix2<f64>> = Vec::with_capacity(n);
        for _ in 0..n {
            let cov = sample_noise_cov(&config.noise_mixture, &mut rng);
            let source = sample_measurement_source(&truth, &mut rng)?;
            ys.push(generate_measurement(&source, &cov, &mut rng));
            covs.push(cov);
        }
        record.measurements.push(ys.clone());

        if record.diverged_at.is_none() {
            let stepped = (if k > 0 { tracker.predict() } else { Ok(()) }).and_then(|_| tracker.update(&ys, &covs));
            if stepped.is_err() || !tracker.state.is_finite() {
                record.diverged_at = Some(k + 1);
            }
        }
        if record.diverged_at.is_some() {
            record.estimates.push(DVector::from_element(dim, f64::NAN));
            record.iou.push(f64::NAN);
            record.center_error.push(f64::NAN);
            continue;
        }
        let mean = tracker.state.mean.clone();
        let shape = config.tracker.shape_of(mean.as_slice());
        record.iou.push(shape_iou(&shape, &truth.region).unwrap_or(f64::NAN));
        record
            .center_error
            .push((shape.centroid() - truth.region.centroid()).norm());
        record.estimates.push(mean);
    }
    record.diagnostics = tracker.diagnostics;
    Ok(record)
}

/// Runs every Monte-Carlo repetition and assembles per-step summaries.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunReport, ScenarioError> {
    config.validate()?;
    let runs: Vec<RunRecord> = (0..config.n_runs)
        .into_par_iter()
        .map(|r| execute_run(config, r))
        .collect::<Result<_, _>>()?;

    let dim = config.prior.dim();
    let truth_centers: Vec<Point> = (0..config.n_steps)
        .map(|k| config.target.snapshot(k).region.centroid())
        .collect();
    let summary: Vec<StepSummary> = (0..config.n_steps)
        .into_par_iter()
        .map(|k| {
            let valid: Vec<&RunRecord> = runs
                .iter()
                .filter(|r| r.estimates[k].iter().all(|v| v.is_finite()))
                .collect();
            let n = valid.len();
            let mut mean_state = DVector::zeros(dim);
            for r in &valid {
                mean_state += &r.estimates[k];
            }
            if n > 0 {
                mean_state /= n as f64;
            } else {
                mean_state.fill(f64::NAN);
            }
            let truth = config.target.snapshot(k);
            let iou_of_mean = if n > 0 {
                shape_iou(&config.tracker.shape_of(mean_state.as_slice()), &truth.region).unwrap_or(f64::NAN)
            } else {
                f64::NAN
            };
            let mean_of = |f: &dyn Fn(&RunRecord) -> f64| {
                if n == 0 {
                    f64::NAN
                } else {
                    valid.iter().map(|r| f(r)).sum::<f64>() / n as f64
                }
            };
            StepSummary {
                step: k + 1,
                iou_of_mean,
                mean_iou: mean_of(&|r| r.iou[k]),
                center_rmse: mean_of(&|r| r.center_error[k].powi(2)).sqrt(),
                valid_runs: n,
                mean_state,
            }
        })
        .collect();

    let diverged_runs = runs.iter().filter(|r| r.diverged()).count();
    Ok(RunReport {
        name: config.name.clone(),
        prior_mean: config.prior.mean.clone(),
        runs,
        summary,
        truth_centers,
        diverged_runs,
    })
}
