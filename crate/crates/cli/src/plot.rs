//! Self-contained SVG plots of a run: one file with the four states, one with
//! the active controls.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;

use crate::artifacts::{RunArtifacts, TrajectoryRow};
use crate::error::PlotError;

pub const STATES_FILE: &str = "states.svg";
pub const CONTROLS_FILE: &str = "controls.svg";

const WIDTH: f64 = 720.0;
const PANEL_HEIGHT: f64 = 180.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 40.0;
/// Paths are thinned to about this many vertices; axes still use every sample.
const MAX_VERTICES: usize = 2000;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

#[derive(Debug, Clone, Copy, Default)]
pub struct PlotOptions {
    /// logarithmic vertical axis for the virion panel
    pub log_x1: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub log_y: bool,
    pub series: Vec<Series>,
}

/// Smallest interval containing every value, widened when degenerate.
fn value_range(values: impl Iterator<Item = f64>, log: bool) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if lo < hi {
        (lo, hi)
    } else if log {
        (lo / 2.0, hi * 2.0)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

fn time_range(rows: &[TrajectoryRow]) -> (f64, f64) {
    (rows[0].t, rows[rows.len() - 1].t)
}

fn panel(title: &str, rows: &[TrajectoryRow], series: Vec<Series>, log_y: bool) -> Panel {
    let y_range = value_range(
        series.iter().flat_map(|s| s.points.iter().map(|p| p.1)),
        log_y,
    );
    Panel {
        title: title.into(),
        x_range: time_range(rows),
        y_range,
        log_y,
        series,
    }
}

/// One panel per state component.
pub fn state_panels(rows: &[TrajectoryRow], opts: PlotOptions) -> Result<Vec<Panel>, PlotError> {
    if rows.is_empty() {
        return Err(PlotError::EmptyInput);
    }
    let names = [
        "x1: free virions",
        "x2: uninfected T cells",
        "x3: proviral T cells",
        "x4: productive T cells",
    ];
    Ok((0..4)
        .map(|i| {
            let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.t, r.x[i])).collect();
            let mut log_y = i == 0 && opts.log_x1;
            if log_y && points.iter().any(|p| p.1 <= 0.0) {
                warn!("x1 has non-positive samples, falling back to a linear axis");
                log_y = false;
            }
            let series = vec![Series {
                label: format!("x{}", i + 1),
                points,
            }];
            panel(names[i], rows, series, log_y)
        })
        .collect())
}

/// Channels that are nonzero somewhere; `u1` if the therapy is identically off.
pub fn active_channels(rows: &[TrajectoryRow]) -> Vec<usize> {
    let active: Vec<usize> = (0..4)
        .filter(|&c| rows.iter().any(|r| r.u[c] != 0.0))
        .collect();
    if active.is_empty() {
        vec![0]
    } else {
        active
    }
}

pub fn control_panel(rows: &[TrajectoryRow]) -> Result<Panel, PlotError> {
    if rows.is_empty() {
        return Err(PlotError::EmptyInput);
    }
    let series = active_channels(rows)
        .into_iter()
        .map(|c| Series {
            label: format!("u{}", c + 1),
            points: rows.iter().map(|r| (r.t, r.u[c])).collect(),
        })
        .collect();
    Ok(panel("therapy efficacy", rows, series, false))
}

fn linear_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn log_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let (a, b) = (lo.log10().ceil() as i32, hi.log10().floor() as i32);
    let ticks: Vec<f64> = (a..=b).map(|e| 10f64.powi(e)).collect();
    if ticks.is_empty() {
        vec![lo, hi]
    } else {
        ticks
    }
}

fn label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.0e}")
    } else {
        format!("{}", (v * 1e4).round() / 1e4)
    }
}

fn render_panel(svg: &mut String, p: &Panel, top: f64) {
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = PANEL_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let (x0, x1) = p.x_range;
    let map_y = |v: f64| -> f64 {
        let (lo, hi) = p.y_range;
        let frac = if p.log_y {
            (v.log10() - lo.log10()) / (hi.log10() - lo.log10())
        } else {
            (v - lo) / (hi - lo)
        };
        top + MARGIN_TOP + plot_h * (1.0 - frac)
    };
    let map_x = |t: f64| MARGIN_LEFT + plot_w * if x1 > x0 { (t - x0) / (x1 - x0) } else { 0.5 };

    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="13" font-weight="bold">{}</text>"#,
        MARGIN_LEFT,
        top + MARGIN_TOP - 8.0,
        p.title
    );
    let _ = writeln!(
        svg,
        "<rect x=\"{MARGIN_LEFT:.1}\" y=\"{:.1}\" width=\"{plot_w:.1}\" height=\"{plot_h:.1}\" fill=\"none\" stroke=\"#444\"/>",
        top + MARGIN_TOP
    );
    let y_ticks = if p.log_y {
        log_ticks(p.y_range.0, p.y_range.1)
    } else {
        linear_ticks(p.y_range.0, p.y_range.1)
    };
    for v in y_ticks {
        let y = map_y(v);
        let _ = writeln!(
            svg,
            "<line x1=\"{:.1}\" y1=\"{y:.2}\" x2=\"{MARGIN_LEFT:.1}\" y2=\"{y:.2}\" stroke=\"#444\"/><text x=\"{:.1}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"end\">{}</text>",
            MARGIN_LEFT - 4.0,
            MARGIN_LEFT - 6.0,
            y + 3.0,
            label(v)
        );
    }
    let base = top + PANEL_HEIGHT - MARGIN_BOTTOM;
    if x1 > x0 {
        for t in linear_ticks(x0, x1) {
            let x = map_x(t);
            let _ = writeln!(
                svg,
                "<line x1=\"{x:.2}\" y1=\"{base:.1}\" x2=\"{x:.2}\" y2=\"{:.1}\" stroke=\"#444\"/><text x=\"{x:.2}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"middle\">{}</text>",
                base + 4.0,
                base + 15.0,
                label(t)
            );
        }
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">t (days)</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        base + 30.0
    );
    for (k, s) in p.series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let stride = s.points.len().div_ceil(MAX_VERTICES).max(1);
        let last = s.points.len() - 1;
        let mut d = String::with_capacity(MAX_VERTICES * 16);
        for (i, &(t, v)) in s.points.iter().enumerate() {
            if i % stride == 0 || i == last {
                let _ = write!(
                    d,
                    "{}{:.2},{:.2}",
                    if i == 0 { "M" } else { " L" },
                    map_x(t),
                    map_y(v)
                );
            }
        }
        let _ = writeln!(
            svg,
            r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"><title>{}</title></path>"#,
            s.label
        );
        if p.series.len() > 1 {
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" font-size="11" fill="{color}" text-anchor="end">{}</text>"#,
                WIDTH - MARGIN_RIGHT - 4.0,
                top + MARGIN_TOP + 14.0 * (k as f64 + 1.0),
                s.label
            );
        }
    }
}

/// Renders stacked panels into one SVG document.
pub fn render(title: &str, panels: &[Panel]) -> String {
    let height = PANEL_HEIGHT * panels.len() as f64 + 30.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="20" font-size="15" text-anchor="middle">{title}</text>"#,
        WIDTH / 2.0
    );
    for (i, p) in panels.iter().enumerate() {
        render_panel(&mut svg, p, 30.0 + PANEL_HEIGHT * i as f64);
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes `states.svg` and `controls.svg` into `dir`.
pub fn emit_plots(
    artifacts: &RunArtifacts,
    dir: &Path,
    opts: PlotOptions,
) -> Result<Vec<PathBuf>, PlotError> {
    let rows = &artifacts.trajectory;
    let states = state_panels(rows, opts)?;
    let controls = control_panel(rows)?;
    let name = &artifacts.summary.name;
    let files = [
        (STATES_FILE, render(&format!("{name}: states"), &states)),
        (
            CONTROLS_FILE,
            render(&format!("{name}: controls"), &[controls]),
        ),
    ];
    let mut written = Vec::new();
    for (file, text) in files {
        let path = dir.join(file);
        fs::write(&path, text).map_err(|source| PlotError::Io {
            path: path.clone(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<TrajectoryRow> {
        (0..=10)
            .map(|i| {
                let t = 2.0 + i as f64;
                TrajectoryRow {
                    t,
                    x: [30.0 * (-0.5 * t).exp(), 900.0 + t, 3.0 - 0.1 * t, 0.5],
                    u: [
                        if i < 6 {
                            0.9
                        } else {
                            0.9 - 0.1 * (i - 5) as f64
                        },
                        0.0,
                        0.0,
                        0.0,
                    ],
                    lambda: None,
                }
            })
            .collect()
    }

    #[test]
    fn empty_input_is_refused() {
        assert!(matches!(
            state_panels(&[], PlotOptions::default()),
            Err(PlotError::EmptyInput)
        ));
        assert!(matches!(control_panel(&[]), Err(PlotError::EmptyInput)));
    }

    #[test]
    fn axes_cover_horizon_and_extremes() {
        let r = rows();
        let mut panels = state_panels(&r, PlotOptions { log_x1: true }).unwrap();
        panels.push(control_panel(&r).unwrap());
        assert!(panels[0].log_y);
        for p in &panels {
            assert_eq!(p.x_range, (2.0, 12.0));
            for s in &p.series {
                for &(_, v) in &s.points {
                    assert!(
                        p.y_range.0 <= v && v <= p.y_range.1,
                        "{} {v} {:?}",
                        p.title,
                        p.y_range
                    );
                }
            }
        }
        // constant x4 still gets a usable axis
        assert!(panels[3].y_range.0 < 0.5 && panels[3].y_range.1 > 0.5);
    }

    #[test]
    fn log_axis_falls_back_for_zero_samples() {
        let mut r = rows();
        r[3].x[0] = 0.0;
        assert!(!state_panels(&r, PlotOptions { log_x1: true }).unwrap()[0].log_y);
    }

    #[test]
    fn only_active_channels_are_drawn() {
        let mut r = rows();
        assert_eq!(active_channels(&r), vec![0]);
        r[2].u[2] = 0.3;
        assert_eq!(active_channels(&r), vec![0, 2]);
        for row in &mut r {
            row.u = [0.0; 4];
        }
        assert_eq!(active_channels(&r), vec![0]);
    }

    #[test]
    fn rendered_document_is_well_formed_svg() {
        let r = rows();
        let svg = render("t", &[control_panel(&r).unwrap()]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<path").count(), 1);
        assert!(!svg.contains("NaN"));
    }
}
