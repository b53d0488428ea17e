//! Scenario files.
//!
//! A scenario is a TOML document with dotted sections (`[target]`,
//! `[measurements]`, `[tracker]`, `[dynamics]`, `[prior]`, `[trajectory]`,
//! `[output]`). Command-line overrides use the same dotted keys, e.g.
//! `tracker.trace_normalize=false`; the value is read as a TOML literal and
//! falls back to a bare string.
//!
//! Ground-truth geometry either names built-in data (`builtin = "aircraft"`)
//! or a file resolved relative to the scenario file.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix2, Vector2};
use serde::Deserialize;
use thiserror::Error;
use toml::{Table, Value};

use crate::filter::{DynamicsSpec, MotionModel, ScalingModel, ScalingVariable, TrackerConfig};
use crate::gaussian::{GaussianState, UnscentedParams};
use crate::sim::target::{parse_group_file, parse_polygon_file, TargetError};
use crate::sim::{CountModel, GroundTruthTarget, Motion, NoiseComponent, ScenarioConfig, TargetGeometry, Trajectory};

const AIRCRAFT: &str = include_str!("../data/aircraft.poly");
const GROUP: &str = include_str!("../data/group.pts");
const TWO_TURN: &str = include_str!("../data/two_turn.path");

/// Bundled scenarios as `(file name, contents)`, sorted by name.
pub const BUNDLED: &[(&str, &str)] = &[
    (
        "moving_aircraft_ellipse.cfg",
        include_str!("../scenarios/moving_aircraft_ellipse.cfg"),
    ),
    (
        "moving_aircraft_starconvex.cfg",
        include_str!("../scenarios/moving_aircraft_starconvex.cfg"),
    ),
    (
        "stationary_aircraft_low.cfg",
        include_str!("../scenarios/stationary_aircraft_low.cfg"),
    ),
    (
        "stationary_aircraft_starconvex_low.cfg",
        include_str!("../scenarios/stationary_aircraft_starconvex_low.cfg"),
    ),
    (
        "stationary_ellipse_low.cfg",
        include_str!("../scenarios/stationary_ellipse_low.cfg"),
    ),
    (
        "stationary_ellipse_starconvex_low.cfg",
        include_str!("../scenarios/stationary_ellipse_starconvex_low.cfg"),
    ),
    (
        "stationary_group_low.cfg",
        include_str!("../scenarios/stationary_group_low.cfg"),
    ),
    (
        "stationary_group_starconvex_low.cfg",
        include_str!("../scenarios/stationary_group_starconvex_low.cfg"),
    ),
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("syntax error: {0}")]
    Parse(String),
    #[error("bad override `{0}`: expected key=value")]
    Override(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

impl ConfigError {
    /// Process exit code: 2 for unreadable or malformed input, 3 for
    /// well-formed input that fails validation.
    pub fn exit_code(&self) -> i32 {
        match self {
            ConfigError::Io { .. } | ConfigError::Parse(_) | ConfigError::Override(_) => 2,
            ConfigError::Invalid(_) => 3,
        }
    }
}

impl From<TargetError> for ConfigError {
    fn from(e: TargetError) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub seed: u64,
    pub n_steps: usize,
    pub n_runs: usize,
    #[serde(default)]
    pub burn_in: usize,
    pub target: TargetSection,
    pub trajectory: Option<TrajectorySection>,
    pub measurements: MeasurementSection,
    pub tracker: TrackerSection,
    #[serde(default)]
    pub dynamics: DynamicsSection,
    pub prior: PriorSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Ellipse,
    Polygon,
    Group,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub kind: TargetKind,
    #[serde(default)]
    pub center: [f64; 2],
    #[serde(default)]
    pub heading: f64,
    pub semi_axes: Option<[f64; 2]>,
    #[serde(default)]
    pub orientation: f64,
    pub builtin: Option<String>,
    pub file: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySection {
    pub builtin: Option<String>,
    pub file: Option<String>,
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountKind {
    Fixed,
    ShiftedPoisson,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSection {
    pub count_model: CountKind,
    /// Measurements per step for `fixed`.
    pub count: Option<usize>,
    /// Poisson mean for `shifted_poisson`.
    pub poisson_mean: Option<f64>,
    /// Row-major 2x2 covariances, one per mixture component.
    pub noise_cov: Vec<[f64; 4]>,
    pub noise_weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Ellipse,
    StarConvex,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerSection {
    pub family: FamilyKind,
    pub n_fourier: Option<usize>,
    #[serde(default = "default_true")]
    pub trace_normalize: bool,
    #[serde(default)]
    pub batch_mode: bool,
    pub scaling_mean: Option<f64>,
    pub scaling_variance: Option<f64>,
    #[serde(default = "default_one")]
    pub ukf_alpha: f64,
    #[serde(default)]
    pub ukf_beta: f64,
    pub ukf_kappa: Option<f64>,
}

fn default_true() -> bool {
    true
}

fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsKind {
    #[default]
    Static,
    ConstantVelocity,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSection {
    #[serde(default)]
    pub model: DynamicsKind,
    #[serde(default = "default_one")]
    pub t: f64,
    #[serde(default)]
    pub q1: f64,
    #[serde(default)]
    pub q2: f64,
}

impl Default for DynamicsSection {
    fn default() -> Self {
        Self {
            model: DynamicsKind::Static,
            t: 1.0,
            q1: 0.0,
            q2: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    pub mean: Vec<f64>,
    pub cov_diag: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub snapshots: Vec<usize>,
}

/// Parses an override value as a TOML literal, or a bare string otherwise.
fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Applies `key=value` overrides with dotted keys to a parsed document.
pub fn apply_overrides(doc: &mut Table, overrides: &[String]) -> Result<(), ConfigError> {
    for ov in overrides {
        let (key, raw) = ov.split_once('=').ok_or_else(|| ConfigError::Override(ov.clone()))?;
        let path: Vec<&str> = key.trim().split('.').collect();
        if path.iter().any(|p| p.is_empty()) {
            return Err(ConfigError::Override(ov.clone()));
        }
        let (last, parents) = path.split_last().expect("split yields one element");
        let mut table = &mut *doc;
        for p in parents {
            let entry = table.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
            table = match entry {
                Value::Table(t) => t,
                _ => {
                    return Err(ConfigError::Invalid(format!(
                        "override `{key}`: `{p}` is not a section"
                    )))
                }
            };
        }
        table.insert(last.to_string(), parse_value(raw.trim()));
    }
    Ok(())
}

/// Parses scenario text, applies overrides and checks the schema.
pub fn parse_scenario(text: &str, overrides: &[String]) -> Result<ScenarioFile, ConfigError> {
    let mut doc: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    apply_overrides(&mut doc, overrides)?;
    ScenarioFile::deserialize(doc).map_err(|e| ConfigError::Invalid(e.to_string().trim().to_string()))
}

/// Where relative data-file references are looked up.
#[derive(Debug, Clone)]
pub enum DataRoot {
    Dir(PathBuf),
    /// Bundled scenarios may only use built-in data.
    BuiltinOnly,
}

fn read_data(
    root: &DataRoot,
    builtin: &Option<String>,
    file: &Option<String>,
    what: &str,
) -> Result<String, ConfigError> {
    match (builtin, file) {
        (Some(b), None) => match (what, b.as_str()) {
            ("polygon", "aircraft") => Ok(AIRCRAFT.to_string()),
            ("group", "group") => Ok(GROUP.to_string()),
            ("trajectory", "two_turn") => Ok(TWO_TURN.to_string()),
            _ => Err(ConfigError::Invalid(format!("unknown built-in {what} `{b}`"))),
        },
        (None, Some(f)) => {
            let path = match root {
                DataRoot::Dir(d) => d.join(f),
                DataRoot::BuiltinOnly => {
                    return Err(ConfigError::Invalid(format!("{what} file `{f}` not allowed here")));
                }
            };
            std::fs::read_to_string(&path).map_err(|e| ConfigError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })
        }
        _ => Err(ConfigError::Invalid(format!(
            "{what} needs exactly one of `builtin` or `file`"
        ))),
    }
}

impl ScenarioFile {
    pub fn build(&self, root: &DataRoot) -> Result<ScenarioConfig, ConfigError> {
        let name_ok = !self.name.is_empty()
            && self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.');
        if !name_ok {
            return Err(ConfigError::Invalid(format!(
                "name `{}` may only use ASCII letters, digits, `_`, `-` and `.`",
                self.name
            )));
        }
        let t = &self.target;
        let geometry = match t.kind {
            TargetKind::Ellipse => {
                let [major, minor] = t
                    .semi_axes
                    .ok_or_else(|| ConfigError::Invalid("ellipse target needs `semi_axes`".into()))?;
                TargetGeometry::ellipse(major, minor, t.orientation)?
            }
            TargetKind::Polygon => {
                TargetGeometry::polygon(parse_polygon_file(&read_data(root, &t.builtin, &t.file, "polygon")?)?)?
            }
            TargetKind::Group => {
                TargetGeometry::point_group(parse_group_file(&read_data(root, &t.builtin, &t.file, "group")?)?)?
            }
        };
        let motion = match &self.trajectory {
            None => Motion::Static {
                center: Vector2::from(t.center),
                heading: t.heading,
            },
            Some(tr) => {
                if !(tr.speed >= 0.0) {
                    return Err(ConfigError::Invalid("trajectory speed must be >= 0".into()));
                }
                let waypoints = parse_polygon_file(&read_data(root, &tr.builtin, &tr.file, "trajectory")?)?;
                Motion::Trajectory(Trajectory::new(waypoints, tr.speed, self.dynamics.t)?)
            }
        };

        let m = &self.measurements;
        let count_model = match m.count_model {
            CountKind::Fixed => CountModel::Fixed(
                m.count
                    .ok_or_else(|| ConfigError::Invalid("fixed count model needs `count`".into()))?,
            ),
            CountKind::ShiftedPoisson => CountModel::ShiftedPoisson(
                m.poisson_mean
                    .ok_or_else(|| ConfigError::Invalid("shifted_poisson needs `poisson_mean`".into()))?,
            ),
        };
        let weights = match &m.noise_weights {
            Some(w) => w.clone(),
            None if m.noise_cov.len() == 1 => vec![1.0],
            None => {
                return Err(ConfigError::Invalid(
                    "several noise components need `noise_weights`".into(),
                ))
            }
        };
        if weights.len() != m.noise_cov.len() {
            return Err(ConfigError::Invalid(format!(
                "{} noise covariances but {} weights",
                m.noise_cov.len(),
                weights.len()
            )));
        }
        let noise_mixture = m
            .noise_cov
            .iter()
            .zip(&weights)
            .map(|(c, &p)| NoiseComponent {
                cov: Matrix2::new(c[0], c[1], c[2], c[3]),
                probability: p,
            })
            .collect();

        let tr = &self.tracker;
        let mut tracker = match tr.family {
            FamilyKind::Ellipse => TrackerConfig::ellipse(),
            FamilyKind::StarConvex => TrackerConfig::star_convex(
                tr.n_fourier
                    .ok_or_else(|| ConfigError::Invalid("star_convex tracker needs `n_fourier`".into()))?,
            ),
        };
        let default_scaling = tracker.scaling;
        let variable = match tr.family {
            FamilyKind::Ellipse => ScalingVariable::SquaredScale,
            FamilyKind::StarConvex => ScalingVariable::Scale,
        };
        tracker.scaling = ScalingModel::new(
            variable,
            tr.scaling_mean.unwrap_or(default_scaling.mean),
            tr.scaling_variance.unwrap_or(default_scaling.variance),
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        tracker.trace_normalize = tr.trace_normalize;
        tracker.batch_mode = tr.batch_mode;
        tracker.unscented = UnscentedParams {
            alpha: tr.ukf_alpha,
            beta: tr.ukf_beta,
            kappa: tr.ukf_kappa,
        };
        let d = &self.dynamics;
        tracker.dynamics = DynamicsSpec {
            model: match d.model {
                DynamicsKind::Static => MotionModel::StaticRandomWalk,
                DynamicsKind::ConstantVelocity => MotionModel::ConstantVelocity,
            },
            t: d.t,
            q1: d.q1,
            q2: d.q2,
        };

        let prior = GaussianState::from_diagonal(&self.prior.mean, &self.prior.cov_diag)
            .map_err(|e| ConfigError::Invalid(format!("prior: {e}")))?;
        if self.prior.cov_diag.iter().any(|v| !(*v >= 0.0)) {
            return Err(ConfigError::Invalid("prior variances must be >= 0".into()));
        }

        let config = ScenarioConfig {
            name: self.name.clone(),
            target: GroundTruthTarget { geometry, motion },
            noise_mixture,
            count_model,
            n_steps: self.n_steps,
            n_runs: self.n_runs,
            prior,
            tracker,
            rng_seed: self.seed,
            burn_in: self.burn_in,
            snapshots: self.output.snapshots.clone(),
        };
        config.validate().map_err(|e| match e {
            crate::sim::ScenarioError::Invalid(m) => ConfigError::Invalid(m),
            other => ConfigError::Invalid(other.to_string()),
        })?;
        Ok(config)
    }
}

/// Loads a scenario file from disk; data files resolve next to it.
pub fn load_scenario_file(path: &Path, overrides: &[String]) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_scenario(&text, overrides)?.build(&DataRoot::Dir(root))
}

pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

/// Looks a bundled scenario up by file name, with or without `.cfg`.
pub fn bundled_text(name: &str) -> Option<&'static str> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name || n.strip_suffix(".cfg") == Some(name))
        .map(|(_, t)| *t)
}

pub fn load_bundled(name: &str, overrides: &[String]) -> Result<ScenarioConfig, ConfigError> {
    let text = bundled_text(name).ok_or_else(|| ConfigError::Io {
        path: name.to_string(),
        message: "no such bundled scenario".into(),
    })?;
    parse_scenario(text, overrides)?.build(&DataRoot::BuiltinOnly)
}

/// A path on disk wins over a bundled scenario of the same name.
pub fn load(path_or_name: &str, overrides: &[String]) -> Result<ScenarioConfig, ConfigError> {
    let path = Path::new(path_or_name);
    if path.exists() || bundled_text(path_or_name).is_none() {
        load_scenario_file(path, overrides)
    } else {
        load_bundled(path_or_name, overrides)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_list_is_sorted_and_parses() {
        let names = bundled_names();
        assert!(names.len() >= 8);
        assert!(names.windows(2).all(|w| w[0] < w[1]));
        for n in names {
            load_bundled(n, &[]).unwrap_or_else(|e| panic!("{n}: {e}"));
        }
    }

    #[test]
    fn override_changes_value() {
        let base = load_bundled("stationary_ellipse_low", &[]).unwrap();
        assert!(base.tracker.trace_normalize);
        let cfg = load_bundled("stationary_ellipse_low", &["tracker.trace_normalize=false".into()]).unwrap();
        assert!(!cfg.tracker.trace_normalize);
        let cfg = load_bundled("stationary_ellipse_low", &["seed=99".into(), "n_runs = 3".into()]).unwrap();
        assert_eq!((cfg.rng_seed, cfg.n_runs), (99, 3));
    }

    #[test]
    fn override_can_add_optional_keys() {
        let cfg = load_bundled("stationary_ellipse_low", &["tracker.ukf_kappa=0.5".into()]).unwrap();
        assert_eq!(cfg.tracker.unscented.kappa, Some(0.5));
    }

    #[test]
    fn unknown_key_is_a_validation_error() {
        let err = load_bundled("stationary_ellipse_low", &["tracker.bogus=1".into()]).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        let err = load_bundled("stationary_ellipse_low", &["no_equals".into()]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn string_fallback() {
        assert_eq!(parse_value("star_convex"), Value::String("star_convex".into()));
        assert_eq!(parse_value("\"x\""), Value::String("x".into()));
        assert_eq!(
            parse_value("[1, 2]"),
            Value::Array(vec![Value::Integer(1), Value::Integer(2)])
        );
    }

    #[test]
    fn syntax_error_exit_code() {
        let err = parse_scenario("name = ", &[]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn missing_file_exit_code() {
        let err = load("/definitely/not/here.cfg", &[]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn semantic_errors_exit_code() {
        for ov in [
            "n_runs=0",
            "measurements.noise_weights=[0.5]",
            "prior.mean=[0.0, 0.0]",
            "tracker.scaling_variance=-1.0",
            "target.kind=\"polygon\"",
            "name=\"../escape\"",
        ] {
            let err = load_bundled("stationary_ellipse_low", &[ov.into()]).unwrap_err();
            assert_eq!(err.exit_code(), 3, "{ov}: {err}");
        }
    }

    #[test]
    fn builtin_only_rejects_files() {
        let err = load_bundled("stationary_aircraft_low", &["target.file=\"x.poly\"".into()]).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
