//! Flat-file output: CSV tables, run metadata and minimal SVG line plots.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::diagnostics::DiagnosticRecord;
use crate::error::{BiError, Result};
use crate::grid::Grid;
use crate::integrator::{FailureKind, RunReport};

use super::settings::Settings;

/// 17 significant digits; negative zero is written as zero.
pub fn fmt_float(x: f64) -> String {
    format!("{:.16e}", x + 0.0)
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| BiError::io(path, e))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| BiError::io(path, e))
}

pub fn timeseries_csv(records: &[DiagnosticRecord]) -> String {
    let mut out = String::with_capacity(256 * (records.len() + 1));
    out.push_str(DiagnosticRecord::CSV_HEADER);
    out.push('\n');
    for r in records {
        let row: Vec<String> = r.csv_values().iter().map(|&v| fmt_float(v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize)]
struct CodeMeta {
    name: &'static str,
    version: &'static str,
}

#[derive(Debug, Serialize)]
struct GridMeta {
    points: usize,
    half_length: f64,
    spacing: f64,
}

#[derive(Debug, Serialize)]
struct RunMetaBody {
    status: &'static str,
    steps: usize,
    dt: f64,
    min_gamma: f64,
    wall_time_s: f64,
    final_t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    failure_kind: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    failure_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    failure_message: Option<String>,
}

#[derive(Debug, Serialize)]
struct RunMeta<'a> {
    code: CodeMeta,
    grid: GridMeta,
    run: RunMetaBody,
    settings: &'a Settings,
}

pub fn run_meta_toml(settings: &Settings, grid: &Grid, report: &RunReport) -> Result<String> {
    let failure = report.failure.as_ref();
    let meta = RunMeta {
        code: CodeMeta {
            name: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
        },
        grid: GridMeta {
            points: grid.len(),
            half_length: grid.half_length(),
            spacing: grid.spacing(),
        },
        run: RunMetaBody {
            status: if failure.is_some() {
                "breakdown"
            } else {
                "completed"
            },
            steps: report.steps,
            dt: report.dt,
            min_gamma: report.min_gamma,
            wall_time_s: report.wall_time.as_secs_f64(),
            final_t: report.final_state.t,
            failure_kind: failure.map(|f| match f.kind {
                FailureKind::Breakdown => "breakdown",
                FailureKind::NonFinite => "non_finite",
            }),
            failure_t: failure.map(|f| f.t),
            failure_message: failure.map(|f| f.message.clone()),
        },
        settings,
    };
    toml::to_string(&meta).map_err(|e| BiError::Config(format!("cannot encode run metadata: {e}")))
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;

/// Polyline of `ys` against `xs` with a frame and the axis extents as
/// labels. Non-finite points are skipped.
pub fn line_plot(title: &str, x_label: &str, xs: &[f64], ys: &[f64]) -> String {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|(&x, &y)| (x, y))
        .collect();
    let extent = |f: fn(&(f64, f64)) -> f64| {
        let lo = pts.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo <= f64::EPSILON * lo.abs().max(1e-300) {
            let pad = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
            (lo - pad, hi + pad)
        } else {
            (lo, hi)
        }
    };
    let (x0, x1) = extent(|p| p.0);
    let (y0, y1) = extent(|p| p.1);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="monospace" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M{l} {t} L{l} {b} L{r} {b}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{l}" y="{}">{}</text>"#,
        t - 20.0,
        escape(title)
    );
    let _ = writeln!(svg, r#"<text x="{l}" y="{}">{x0:.4e}</text>"#, b + 16.0);
    let _ = writeln!(
        svg,
        r#"<text x="{r}" y="{}" text-anchor="end">{x1:.4e}</text>"#,
        b + 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        0.5 * (l + r),
        b + 34.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{b}" text-anchor="end">{y0:.3e}</text>"#,
        l - 4.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="end">{y1:.3e}</text>"#,
        l - 4.0,
        t + 4.0
    );
    let mut line = String::new();
    for (x, y) in &pts {
        let _ = write!(line, "{:.2},{:.2} ", sx(*x), sy(*y));
    }
    let _ = writeln!(
        svg,
        r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#,
        line.trim_end()
    );
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// One plot per CSV column other than `t`, named `<column>.svg`.
pub fn write_plots(dir: &Path, records: &[DiagnosticRecord]) -> Result<()> {
    let names: Vec<&str> = DiagnosticRecord::CSV_HEADER.split(',').collect();
    let rows: Vec<[f64; 12]> = records.iter().map(|r| r.csv_values()).collect();
    let ts: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    for (c, name) in names.iter().enumerate().skip(1) {
        let ys: Vec<f64> = rows.iter().map(|r| r[c]).collect();
        write_file(
            &dir.join(format!("{name}.svg")),
            &line_plot(name, "t", &ts, &ys),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_carry_seventeen_digits() {
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_float(0.0), "0.0000000000000000e0");
        assert_eq!(fmt_float(-0.0), "0.0000000000000000e0");
        let x = 1.0 / 3.0;
        assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn plot_handles_flat_and_empty_series() {
        let flat = line_plot("zero", "t", &[0.0, 1.0, 2.0], &[0.0, 0.0, 0.0]);
        assert!(flat.contains("<polyline"));
        assert!(!flat.contains("NaN"));
        let empty = line_plot("none", "t", &[], &[]);
        assert!(empty.ends_with("</svg>\n"));
        let skip = line_plot("a<b", "t", &[0.0, 1.0], &[f64::NAN, 1.0]);
        assert!(skip.contains("a&lt;b"));
        assert!(!skip.contains("NaN"));
    }
}
