//! Static SVG figures. Plotting is best effort: callers log failures and
//! carry on, so nothing here can fail a numeric run.

use std::path::Path;

use plotters::prelude::*;

use crate::abc::TraceRow;
use crate::hysteresis::HysteresisLoop;
use crate::platoon::SweepPoint;
use crate::{Error, Result};

const SIZE: (u32, u32) = (640, 420);
const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
    RGBColor(255, 127, 14),
    RGBColor(23, 190, 207),
];

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

fn plot_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::invalid(format!("plot {}: {e}", path.display()))
}

fn bounds(series: &[Series<'_>]) -> Option<((f64, f64), (f64, f64))> {
    let pts = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return None;
    }
    let pad = |lo: f64, hi: f64| {
        let d = if hi > lo {
            0.05 * (hi - lo)
        } else {
            0.5 * lo.abs().max(1e-9)
        };
        (lo - d, hi + d)
    };
    Some((pad(x0, x1), pad(y0, y1)))
}

/// Line chart of one or more series sharing axes.
pub fn line_chart(path: &Path, title: &str, x_label: &str, y_label: &str, series: &[Series<'_>]) -> Result<()> {
    let ((x0, x1), (y0, y1)) = bounds(series).ok_or_else(|| plot_err(path, "nothing to draw"))?;
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(64)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(|e| plot_err(path, e))?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc(y_label)
        .draw()
        .map_err(|e| plot_err(path, e))?;
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(s.points.iter().copied(), color.stroke_width(2)))
            .map_err(|e| plot_err(path, e))?
            .label(s.label)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
    }
    if series.len() > 1 {
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(|e| plot_err(path, e))?;
    }
    root.present().map_err(|e| plot_err(path, e))
}

/// Tolerance and acceptance ratio against iteration.
pub fn plot_trace(path: &Path, title: &str, rows: &[TraceRow]) -> Result<()> {
    let gamma0 = rows.first().map_or(1.0, |r| r.gamma).max(f64::MIN_POSITIVE);
    line_chart(
        path,
        title,
        "iteration",
        "gamma / gamma0, rho",
        &[
            Series {
                label: "gamma / gamma0",
                points: rows.iter().map(|r| (r.iteration as f64, r.gamma / gamma0)).collect(),
            },
            Series {
                label: "rho",
                points: rows.iter().map(|r| (r.iteration as f64, r.rho)).collect(),
            },
        ],
    )
}

/// Flow-density loops in veh/km and veh/h.
pub fn plot_loops(path: &Path, title: &str, loops: &[(&str, &HysteresisLoop)]) -> Result<()> {
    let series: Vec<Series<'_>> = loops
        .iter()
        .map(|(label, lp)| Series {
            label,
            points: lp.points.iter().map(|&(k, q)| (k * 1000.0, q * 3600.0)).collect(),
        })
        .collect();
    line_chart(path, title, "density (veh/km)", "flow (veh/h)", &series)
}

/// Mean maximal hysteresis magnitude against ACC penetration.
pub fn plot_penetration(path: &Path, points: &[SweepPoint]) -> Result<()> {
    let at = |f: fn(&SweepPoint) -> f64| -> Vec<(f64, f64)> {
        points.iter().map(|p| (100.0 * p.penetration, f(p))).collect()
    };
    line_chart(
        path,
        "hysteresis magnitude against ACC penetration",
        "penetration (%)",
        "magnitude",
        &[
            Series {
                label: "mean",
                points: at(|p| p.magnitude),
            },
            Series {
                label: "mean - 2 se",
                points: at(|p| p.magnitude - 2.0 * p.magnitude_se),
            },
            Series {
                label: "mean + 2 se",
                points: at(|p| p.magnitude + 2.0 * p.magnitude_se),
            },
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_an_svg() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.svg");
        let s = Series {
            label: "x",
            points: vec![(0.0, 1.0), (1.0, 3.0), (2.0, 2.0)],
        };
        line_chart(&path, "t", "x", "y", &[s]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("<svg") && text.contains("polyline"));
    }

    #[test]
    fn empty_input_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(line_chart(&dir.path().join("b.svg"), "t", "x", "y", &[]).is_err());
    }
}
