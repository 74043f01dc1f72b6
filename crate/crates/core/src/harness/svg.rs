//! Standalone SVG plots: curves and heat grids.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::export::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    LossCurve,
    TemperatureCurve,
    HeatGrid,
    FitnessCurve,
}

impl PlotKind {
    pub fn is_curve(self) -> bool {
        self != PlotKind::HeatGrid
    }

    fn default_labels(self) -> (&'static str, &'static str) {
        match self {
            PlotKind::LossCurve => ("iteration", "loss"),
            PlotKind::TemperatureCurve => ("iteration", "temperature"),
            PlotKind::HeatGrid => ("x1", "x2"),
            PlotKind::FitnessCurve => ("generation", "fitness"),
        }
    }
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "loss" | "loss_curve" => Ok(PlotKind::LossCurve),
            "temperature" | "temperature_curve" => Ok(PlotKind::TemperatureCurve),
            "heatmap" | "heat_grid" => Ok(PlotKind::HeatGrid),
            "fitness" | "fitness_curve" => Ok(PlotKind::FitnessCurve),
            _ => Err(Error::config("kind", format!("unknown plot kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlotData {
    Series(Vec<(f64, f64)>),
    /// Row-major values, `nx` per row; row 0 is drawn at the bottom.
    Grid {
        nx: usize,
        ny: usize,
        values: Vec<f64>,
        x_range: (f64, f64),
        y_range: (f64, f64),
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvgOptions {
    pub width: f64,
    pub height: f64,
    pub title: Option<String>,
}

impl Default for SvgOptions {
    fn default() -> Self {
        Self {
            width: 800.0,
            height: 600.0,
            title: None,
        }
    }
}

const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;
const TICKS: usize = 5;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_tick(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 {
        "0".into()
    } else if (1e-3..1e5).contains(&a) {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn fmt_px(v: f64) -> String {
    format!("{v:.2}")
}

/// Linear map from a data range onto a pixel range; a degenerate data
/// range is widened so constant series still render.
#[derive(Debug, Clone, Copy)]
struct Scale {
    lo: f64,
    hi: f64,
    p0: f64,
    p1: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64, p0: f64, p1: f64) -> Self {
        let (lo, hi) = if hi > lo {
            (lo, hi)
        } else {
            let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.5 };
            (lo - pad, hi + pad)
        };
        Self { lo, hi, p0, p1 }
    }

    fn map(&self, v: f64) -> f64 {
        self.p0 + (v - self.lo) / (self.hi - self.lo) * (self.p1 - self.p0)
    }
}

struct Frame {
    x: Scale,
    y: Scale,
}

impl Frame {
    fn new(opts: &SvgOptions, xr: (f64, f64), yr: (f64, f64)) -> Self {
        Self {
            x: Scale::new(xr.0, xr.1, MARGIN_LEFT, opts.width - MARGIN_RIGHT),
            y: Scale::new(yr.0, yr.1, opts.height - MARGIN_BOTTOM, MARGIN_TOP),
        }
    }

    fn axes(&self, out: &mut String, opts: &SvgOptions, labels: (&str, &str)) {
        let (x0, x1) = (self.x.p0, self.x.p1);
        let (y0, y1) = (self.y.p0, self.y.p1);
        let _ = writeln!(
            out,
            r#"<g class="axes" stroke="black" stroke-width="1"><line x1="{a}" y1="{b}" x2="{c}" y2="{b}"/><line x1="{a}" y1="{b}" x2="{a}" y2="{d}"/></g>"#,
            a = fmt_px(x0),
            b = fmt_px(y0),
            c = fmt_px(x1),
            d = fmt_px(y1)
        );
        out.push_str(r#"<g class="ticks" font-family="sans-serif" font-size="12">"#);
        out.push('\n');
        for i in 0..TICKS {
            let f = i as f64 / (TICKS - 1) as f64;
            let xv = self.x.lo + f * (self.x.hi - self.x.lo);
            let px = self.x.map(xv);
            let _ = writeln!(
                out,
                r#"<line x1="{p}" y1="{y}" x2="{p}" y2="{y2}" stroke="black"/><text x="{p}" y="{ty}" text-anchor="middle">{l}</text>"#,
                p = fmt_px(px),
                y = fmt_px(y0),
                y2 = fmt_px(y0 + 5.0),
                ty = fmt_px(y0 + 20.0),
                l = fmt_tick(xv)
            );
            let yv = self.y.lo + f * (self.y.hi - self.y.lo);
            let py = self.y.map(yv);
            let _ = writeln!(
                out,
                r#"<line x1="{x2}" y1="{p}" x2="{x}" y2="{p}" stroke="black"/><text x="{tx}" y="{p}" text-anchor="end" dominant-baseline="middle">{l}</text>"#,
                p = fmt_px(py),
                x = fmt_px(x0),
                x2 = fmt_px(x0 - 5.0),
                tx = fmt_px(x0 - 8.0),
                l = fmt_tick(yv)
            );
        }
        out.push_str("</g>\n");
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
            fmt_px((x0 + x1) / 2.0),
            fmt_px(opts.height - 15.0),
            escape(labels.0)
        );
        let _ = writeln!(
            out,
            r#"<text x="20" y="{y}" font-family="sans-serif" font-size="14" text-anchor="middle" transform="rotate(-90 20 {y})">{l}</text>"#,
            y = fmt_px((y0 + y1) / 2.0),
            l = escape(labels.1)
        );
    }
}

/// Grey at `t = 0` to deep red at `t = 1`; luminance decreases
/// monotonically along the ramp.
pub fn ramp(t: f64) -> (u8, u8, u8) {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    (lerp(235.0, 165.0), lerp(235.0, 15.0), lerp(235.0, 21.0))
}

fn bounds(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values
        .filter(|v| v.is_finite())
        .fold(None, |acc, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
}

pub fn render_svg(kind: PlotKind, data: &PlotData, opts: &SvgOptions) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w} {h}" width="{w}" height="{h}">"#,
        w = opts.width,
        h = opts.height
    );
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    if let Some(t) = &opts.title {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
            fmt_px(opts.width / 2.0),
            escape(t)
        );
    }
    match (kind.is_curve(), data) {
        (true, PlotData::Series(points)) => {
            if points.is_empty() {
                return Err(Error::InvalidArgument("cannot plot an empty series".into()));
            }
            let xr = bounds(points.iter().map(|p| p.0)).unwrap_or((0.0, 1.0));
            let yr = bounds(points.iter().map(|p| p.1)).unwrap_or((0.0, 1.0));
            let frame = Frame::new(opts, xr, yr);
            frame.axes(&mut out, opts, kind.default_labels());
            let coords: Vec<String> = points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .map(|&(x, y)| format!("{},{}", fmt_px(frame.x.map(x)), fmt_px(frame.y.map(y))))
                .collect();
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>"#,
                coords.join(" ")
            );
        }
        (
            false,
            PlotData::Grid {
                nx,
                ny,
                values,
                x_range,
                y_range,
            },
        ) => {
            if *nx == 0 || *ny == 0 || values.len() != nx * ny {
                return Err(Error::InvalidArgument(format!(
                    "heat grid needs {nx}x{ny} values, got {}",
                    values.len()
                )));
            }
            let frame = Frame::new(opts, *x_range, *y_range);
            let (vlo, vhi) = bounds(values.iter().copied()).unwrap_or((0.0, 1.0));
            let span = if vhi > vlo { vhi - vlo } else { 1.0 };
            let cw = (frame.x.p1 - frame.x.p0) / *nx as f64;
            let ch = (frame.y.p0 - frame.y.p1) / *ny as f64;
            out.push_str("<g class=\"cells\" shape-rendering=\"crispEdges\">\n");
            for j in 0..*ny {
                for i in 0..*nx {
                    let (r, g, b) = ramp((values[j * nx + i] - vlo) / span);
                    let _ = writeln!(
                        out,
                        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="rgb({r},{g},{b})"/>"#,
                        fmt_px(frame.x.p0 + i as f64 * cw),
                        fmt_px(frame.y.p0 - (j + 1) as f64 * ch),
                        fmt_px(cw),
                        fmt_px(ch)
                    );
                }
            }
            out.push_str("</g>\n");
            frame.axes(&mut out, opts, kind.default_labels());
        }
        _ => {
            return Err(Error::InvalidArgument(format!(
                "{kind:?} cannot render this kind of data"
            )))
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn write_svg(kind: PlotKind, data: &PlotData, opts: &SvgOptions, path: &Path) -> Result<()> {
    let svg = render_svg(kind, data, opts)?;
    write_atomic(path, svg.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::sa_temperature;

    fn polyline_coords(svg: &str) -> Vec<(f64, f64)> {
        let start = svg.find("points=\"").unwrap() + 8;
        let end = start + svg[start..].find('"').unwrap();
        svg[start..end]
            .split(' ')
            .map(|p| {
                let (x, y) = p.split_once(',').unwrap();
                (x.parse().unwrap(), y.parse().unwrap())
            })
            .collect()
    }

    #[test]
    fn two_point_loss_curve() {
        let svg = render_svg(
            PlotKind::LossCurve,
            &PlotData::Series(vec![(0.0, 3.0), (1.0, 1.0)]),
            &SvgOptions::default(),
        )
        .unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(polyline_coords(&svg).len(), 2);
        assert!(svg.contains("viewBox=\"0 0 800 600\""));
    }

    #[test]
    fn two_by_two_heat_grid() {
        let svg = render_svg(
            PlotKind::HeatGrid,
            &PlotData::Grid {
                nx: 2,
                ny: 2,
                values: vec![0.0, 1.0, 2.0, 3.0],
                x_range: (0.0, 1.0),
                y_range: (0.0, 1.0),
            },
            &SvgOptions::default(),
        )
        .unwrap();
        assert_eq!(svg.matches("<rect x=").count(), 4);
    }

    #[test]
    fn temperature_curve_descends() {
        let pts: Vec<(f64, f64)> = (0..100).map(|i| (i as f64, sa_temperature(i, 1.0, 0.95))).collect();
        assert!(pts.windows(2).all(|w| w[1].1 < w[0].1));
        let svg = render_svg(PlotKind::TemperatureCurve, &PlotData::Series(pts), &SvgOptions::default()).unwrap();
        let c = polyline_coords(&svg);
        assert_eq!(c.len(), 100);
        // Pixel y grows downward.
        assert!(c.windows(2).all(|w| w[1].1 > w[0].1));
    }

    #[test]
    fn mismatches_and_empty_data_are_errors() {
        let o = SvgOptions::default();
        assert!(render_svg(PlotKind::HeatGrid, &PlotData::Series(vec![(0.0, 1.0)]), &o).is_err());
        assert!(render_svg(PlotKind::LossCurve, &PlotData::Series(vec![]), &o).is_err());
        let g = PlotData::Grid {
            nx: 2,
            ny: 2,
            values: vec![1.0],
            x_range: (0.0, 1.0),
            y_range: (0.0, 1.0),
        };
        assert!(render_svg(PlotKind::HeatGrid, &g, &o).is_err());
        assert!(render_svg(PlotKind::FitnessCurve, &g, &o).is_err());
    }

    #[test]
    fn deterministic_and_ramp_monotone() {
        let d = PlotData::Series(vec![(0.0, 1.0), (1.0, 1.0)]);
        let o = SvgOptions::default();
        assert_eq!(
            render_svg(PlotKind::FitnessCurve, &d, &o).unwrap(),
            render_svg(PlotKind::FitnessCurve, &d, &o).unwrap()
        );
        let lum = |t: f64| {
            let (r, g, b) = ramp(t);
            0.2126 * r as f64 + 0.7152 * g as f64 + 0.0722 * b as f64
        };
        assert!((0..10).all(|i| lum(i as f64 / 10.0) > lum((i + 1) as f64 / 10.0)));
    }
}
