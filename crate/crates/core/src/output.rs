//! CSV tables and SVG shape overlays for a finished scenario.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use crate::filter::{ShapeFamily, TrackerConfig};
use crate::shape::{BoundingBox, Point};
use crate::sim::{RunReport, ScenarioConfig};

/// Everything written for one scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputBundle {
    pub name: String,
    /// One row per step and run.
    pub estimates_csv: String,
    /// One row per step.
    pub summary_csv: String,
    /// `(step, svg document)` per snapshot.
    pub plots: Vec<(usize, String)>,
}

/// Column names of the state vector under `tracker`.
pub fn state_columns(tracker: &TrackerConfig) -> Vec<String> {
    let mut cols = vec!["center_x".to_string(), "center_y".to_string()];
    if tracker.dynamics.has_velocity() {
        cols.push("velocity_x".into());
        cols.push("velocity_y".into());
    }
    match tracker.shape_family {
        ShapeFamily::Ellipse => cols.extend(["a", "b", "c"].map(String::from)),
        ShapeFamily::StarConvex => {
            cols.push("a0".into());
            for k in 1..=tracker.n_fourier {
                cols.push(format!("a{k}"));
                cols.push(format!("b{k}"));
            }
        }
    }
    cols
}

fn push_row(out: &mut String, fields: impl IntoIterator<Item = String>) {
    let row: Vec<String> = fields.into_iter().collect();
    out.push_str(&row.join(","));
    out.push('\n');
}

pub fn estimates_csv(report: &RunReport, config: &ScenarioConfig) -> String {
    let mut out = String::new();
    let mut header = vec!["step".to_string(), "run".to_string()];
    header.extend(state_columns(&config.tracker));
    header.extend(["iou", "center_error"].map(String::from));
    push_row(&mut out, header);
    for k in 0..config.n_steps {
        for (r, run) in report.runs.iter().enumerate() {
            let mut row = vec![(k + 1).to_string(), r.to_string()];
            row.extend(run.estimates[k].iter().map(|v| v.to_string()));
            row.push(run.iou[k].to_string());
            row.push(run.center_error[k].to_string());
            push_row(&mut out, row);
        }
    }
    out
}

pub fn summary_csv(report: &RunReport, config: &ScenarioConfig) -> String {
    let mut out = String::new();
    let mut header = vec!["step".to_string()];
    header.extend(state_columns(&config.tracker));
    header.extend(["iou", "mean_iou", "center_rmse", "valid_runs"].map(String::from));
    push_row(&mut out, header);
    for s in &report.summary {
        let mut row = vec![s.step.to_string()];
        row.extend(s.mean_state.iter().map(|v| v.to_string()));
        row.push(s.iou_of_mean.to_string());
        row.push(s.mean_iou.to_string());
        row.push(s.center_rmse.to_string());
        row.push(s.valid_runs.to_string());
        push_row(&mut out, row);
    }
    out
}

const PLOT_SIZE: f64 = 600.0;

fn path_data(points: &[Point]) -> String {
    let mut d = String::new();
    for (i, p) in points.iter().enumerate() {
        let _ = write!(d, "{}{:.4},{:.4} ", if i == 0 { "M" } else { "L" }, p[0], -p[1]);
    }
    d.push('Z');
    d
}

/// SVG overlay for step `step` (1-based): true outline, averaged estimate
/// and the measurements of run 0.
pub fn snapshot_svg(report: &RunReport, config: &ScenarioConfig, step: usize) -> String {
    let k = step - 1;
    let truth = config.target.snapshot(k);
    let truth_outline = truth.region.boundary_polygon();
    let mean = &report.summary[k].mean_state;
    let estimate = mean
        .iter()
        .all(|v| v.is_finite())
        .then(|| config.tracker.shape_of(mean.as_slice()).boundary_polygon());

    // Static targets accumulate measurements; moving ones show the current scan.
    let moving = matches!(config.target.motion, crate::sim::Motion::Trajectory(_));
    let measurements: Vec<Point> = match report.runs.first() {
        Some(run) if moving => run.measurements[k].clone(),
        Some(run) => run.measurements[..=k].iter().flatten().copied().collect(),
        None => Vec::new(),
    };

    let mut bbox = BoundingBox::of(&truth_outline);
    if let Some(e) = &estimate {
        let eb = BoundingBox::of(e);
        if eb.is_finite() {
            bbox = bbox.union(&eb);
        }
    }
    if !measurements.is_empty() {
        bbox = bbox.union(&BoundingBox::of(&measurements));
    }
    let span = (bbox.max - bbox.min).max().max(1e-6);
    let margin = 0.05 * span;
    let (x0, y0) = (bbox.min[0] - margin, -bbox.max[1] - margin);
    let (w, h) = (
        bbox.max[0] - bbox.min[0] + 2.0 * margin,
        bbox.max[1] - bbox.min[1] + 2.0 * margin,
    );
    let stroke = span / 300.0;
    let dot = span / 250.0;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{PLOT_SIZE}" height="{:.0}" viewBox="{x0:.4} {y0:.4} {w:.4} {h:.4}">"#,
        PLOT_SIZE * h / w
    );
    let _ = writeln!(svg, "<title>{} step {step}</title>", xml_escape(&report.name));
    let _ = writeln!(
        svg,
        r#"<rect x="{x0:.4}" y="{y0:.4}" width="{w:.4}" height="{h:.4}" fill="white"/>"#
    );
    if let Some(e) = &estimate {
        let _ = writeln!(
            svg,
            r#"<path d="{}" fill="steelblue" fill-opacity="0.35" stroke="steelblue" stroke-width="{stroke:.4}"/>"#,
            path_data(e)
        );
    }
    let _ = writeln!(
        svg,
        r#"<path d="{}" fill="none" stroke="black" stroke-width="{:.4}"/>"#,
        path_data(&truth_outline),
        1.5 * stroke
    );
    if let Some(members) = &truth.members {
        for m in members {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.4}" cy="{:.4}" r="{:.4}" fill="black"/>"#,
                m[0],
                -m[1],
                2.0 * dot
            );
        }
    }
    for z in &measurements {
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.4}" cy="{:.4}" r="{dot:.4}" fill="crimson"/>"#,
            z[0], -z[1]
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render(report: &RunReport, config: &ScenarioConfig) -> OutputBundle {
    let plots = if config.n_steps == 0 {
        Vec::new()
    } else {
        config
            .snapshot_steps()
            .into_iter()
            .map(|s| (s, snapshot_svg(report, config, s)))
            .collect()
    };
    OutputBundle {
        name: report.name.clone(),
        estimates_csv: estimates_csv(report, config),
        summary_csv: summary_csv(report, config),
        plots,
    }
}

impl OutputBundle {
    /// File names relative to the output directory, in write order.
    pub fn file_names(&self) -> Vec<String> {
        let mut names = vec![
            format!("{}_estimates.csv", self.name),
            format!("{}_summary.csv", self.name),
        ];
        names.extend(self.plots.iter().map(|(s, _)| format!("{}_step{s:04}.svg", self.name)));
        names
    }

    /// Writes all files into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let contents = [&self.estimates_csv, &self.summary_csv]
            .into_iter()
            .chain(self.plots.iter().map(|(_, svg)| svg));
        let mut written = Vec::new();
        for (name, body) in self.file_names().into_iter().zip(contents) {
            let path = dir.join(name);
            std::fs::write(&path, body)?;
            written.push(path);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::load_bundled;
    use crate::sim::run_scenario;

    fn small(name: &str) -> (ScenarioConfig, RunReport) {
        let cfg = load_bundled(
            name,
            &["n_steps=4".into(), "n_runs=3".into(), "output.snapshots=[2, 4]".into()],
        )
        .unwrap();
        let report = run_scenario(&cfg).unwrap();
        (cfg, report)
    }

    #[test]
    fn csv_shapes() {
        let (cfg, report) = small("moving_aircraft_starconvex");
        let bundle = render(&report, &cfg);
        let est: Vec<&str> = bundle.estimates_csv.lines().collect();
        assert_eq!(est.len(), 1 + 4 * 3);
        let header: Vec<&str> = est[0].split(',').collect();
        assert_eq!(
            &header[..6],
            &["step", "run", "center_x", "center_y", "velocity_x", "velocity_y"]
        );
        assert_eq!(header.len(), 2 + 4 + 11 + 2);
        assert!(est.iter().all(|l| l.split(',').count() == header.len()));
        let sum: Vec<&str> = bundle.summary_csv.lines().collect();
        assert_eq!(sum.len(), 1 + 4);
        assert!(!bundle.estimates_csv.contains('\r'));
    }

    #[test]
    fn ellipse_columns() {
        let cfg = load_bundled("stationary_ellipse_low", &[]).unwrap();
        assert_eq!(state_columns(&cfg.tracker), ["center_x", "center_y", "a", "b", "c"]);
    }

    #[test]
    fn svg_per_snapshot() {
        let (cfg, report) = small("stationary_group_low");
        let bundle = render(&report, &cfg);
        assert_eq!(bundle.plots.len(), 2);
        let svg = &bundle.plots[1].1;
        assert!(svg.contains(r#"version="1.1""#));
        assert!(svg.trim_end().ends_with("</svg>"));
        // 4 accumulated measurements of run 0 plus 5 group members
        assert_eq!(svg.matches("<circle").count(), 4 + 5);
        assert_eq!(bundle.file_names()[2], "stationary_group_low_step0002.svg");
    }

    #[test]
    fn write_creates_files() {
        let (cfg, report) = small("stationary_ellipse_low");
        let bundle = render(&report, &cfg);
        let dir = std::env::temp_dir().join(format!("rhm-output-test-{}", std::process::id()));
        let written = bundle.write(&dir).unwrap();
        assert_eq!(written.len(), 4);
        assert_eq!(std::fs::read_to_string(&written[1]).unwrap(), bundle.summary_csv);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
