//! Self-contained SVG plots: capacity curves, degradation dot plots, and
//! grouped scenario bars. Output is deterministic for identical input; no
//! timestamps, no randomness.

use std::fmt::Write as _;

use crate::report::ReportError;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 560.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 60.0;

const SERIES_COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];
const BAR_COLORS: [&str; 3] = ["#1f77b4", "#ff7f0e", "#2ca02c"];
const BAR_LABELS: [&str; 3] = ["model 1 (linear)", "model 2 (DOD)", "benchmark"];

/// A labeled line or dot trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// One scenario's three bars.
#[derive(Debug, Clone, PartialEq)]
pub struct BarGroup {
    pub label: String,
    pub model1: f64,
    pub model2: f64,
    pub benchmark: f64,
}

/// What to render.
#[derive(Debug, Clone, PartialEq)]
pub enum PlotSpec {
    /// Capacity vs cycle number, one polyline per series.
    CapacityCurves { title: String, traces: Vec<Trace> },
    /// Per-cycle fade vs cycle number, one dot per delta.
    DegradationDots { title: String, traces: Vec<Trace> },
    /// Grouped three-bar comparison per scenario.
    ScenarioBars {
        title: String,
        groups: Vec<BarGroup>,
    },
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn from_bounds(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self, ReportError> {
        if ![x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite()) {
            return Err(ReportError::EmptyPlot);
        }
        // Degenerate ranges get a symmetric pad so scaling stays finite.
        let (y_min, y_max) = if y_min == y_max {
            (y_min - 1.0, y_max + 1.0)
        } else {
            let pad = 0.05 * (y_max - y_min);
            (y_min - pad, y_max + pad)
        };
        let (x_min, x_max) = if x_min == x_max {
            (x_min - 1.0, x_max + 1.0)
        } else {
            (x_min, x_max)
        };
        Ok(Self {
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }

    fn x(&self, v: f64) -> f64 {
        MARGIN_LEFT
            + (v - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT
            - MARGIN_BOTTOM
            - (v - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn c(v: f64) -> String {
    format!("{v:.2}")
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (0.01..100000.0).contains(&a) {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.3e}")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn open_svg(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r#"<svg version="1.1" width="{WIDTH}" height="{HEIGHT}" xmlns="http://www.w3.org/2000/svg">"#
    );
    let _ = write!(
        out,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = write!(
        out,
        r#"<text x="{}" y="28" text-anchor="middle" font-family="sans-serif" font-size="18">{}</text>"#,
        WIDTH / 2.0,
        xml_escape(title)
    );
}

fn draw_axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str) {
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let y1 = MARGIN_TOP;
    let _ = write!(
        out,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        c(x0),
        c(y0),
        c(x1),
        c(y0)
    );
    let _ = write!(
        out,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        c(x0),
        c(y0),
        c(x0),
        c(y1)
    );
    for i in 0..=4 {
        let fx = frame.x_min + (frame.x_max - frame.x_min) * i as f64 / 4.0;
        let px = frame.x(fx);
        let _ = write!(
            out,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
            c(px),
            c(y0),
            c(px),
            c(y0 + 5.0)
        );
        let _ = write!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
            c(px),
            c(y0 + 20.0),
            tick_label(fx)
        );
        let fy = frame.y_min + (frame.y_max - frame.y_min) * i as f64 / 4.0;
        let py = frame.y(fy);
        let _ = write!(
            out,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
            c(x0 - 5.0),
            c(py),
            c(x0),
            c(py)
        );
        let _ = write!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end" font-family="sans-serif" font-size="12">{}</text>"#,
            c(x0 - 8.0),
            c(py + 4.0),
            tick_label(fy)
        );
    }
    let _ = write!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        c((x0 + x1) / 2.0),
        c(HEIGHT - 14.0),
        xml_escape(x_label)
    );
    let _ = write!(
        out,
        r#"<text x="18" y="{}" text-anchor="middle" font-family="sans-serif" font-size="14" transform="rotate(-90 18 {})">{}</text>"#,
        c((y0 + y1) / 2.0),
        c((y0 + y1) / 2.0),
        xml_escape(y_label)
    );
}

fn legend(out: &mut String, entries: &[(String, &str)]) {
    for (i, (label, color)) in entries.iter().enumerate() {
        let y = MARGIN_TOP + 8.0 + 18.0 * i as f64;
        let _ = write!(
            out,
            r#"<rect x="{}" y="{}" width="12" height="12" fill="{}"/>"#,
            c(MARGIN_LEFT + 10.0),
            c(y),
            color
        );
        let _ = write!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#,
            c(MARGIN_LEFT + 28.0),
            c(y + 10.0),
            xml_escape(label)
        );
    }
}

fn data_bounds(traces: &[Trace]) -> Result<(f64, f64, f64, f64), ReportError> {
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    let mut any = false;
    for t in traces {
        for &(x, y) in &t.points {
            if !x.is_finite() || !y.is_finite() {
                return Err(ReportError::EmptyPlot);
            }
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
            any = true;
        }
    }
    if !any {
        return Err(ReportError::EmptyPlot);
    }
    Ok((x_min, x_max, y_min, y_max))
}

/// Render a plot spec into a standalone SVG document.
pub fn render(spec: &PlotSpec) -> Result<String, ReportError> {
    match spec {
        PlotSpec::CapacityCurves { title, traces } => {
            let (x0, x1, y0, y1) = data_bounds(traces)?;
            let frame = Frame::from_bounds(x0, x1, y0, y1)?;
            let mut out = String::new();
            open_svg(&mut out, title);
            draw_axes(&mut out, &frame, "cycle number", "discharge capacity (Ah)");
            for (i, t) in traces.iter().enumerate() {
                let color = SERIES_COLORS[i % SERIES_COLORS.len()];
                let pts: Vec<String> = t
                    .points
                    .iter()
                    .map(|&(x, y)| format!("{},{}", c(frame.x(x)), c(frame.y(y))))
                    .collect();
                let _ = write!(
                    out,
                    r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                    pts.join(" "),
                    color
                );
            }
            legend(
                &mut out,
                &traces
                    .iter()
                    .enumerate()
                    .map(|(i, t)| (t.label.clone(), SERIES_COLORS[i % SERIES_COLORS.len()]))
                    .collect::<Vec<_>>(),
            );
            out.push_str("</svg>");
            Ok(out)
        }
        PlotSpec::DegradationDots { title, traces } => {
            let (x0, x1, y0, y1) = data_bounds(traces)?;
            let frame = Frame::from_bounds(x0, x1, y0.min(0.0), y1.max(0.0))?;
            let mut out = String::new();
            open_svg(&mut out, title);
            draw_axes(&mut out, &frame, "cycle number", "per-cycle fade (Ah)");
            // dashed zero line; deltas go negative
            let zero_y = frame.y(0.0);
            let _ = write!(
                out,
                r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999999" stroke-dasharray="4 3"/>"##,
                c(MARGIN_LEFT),
                c(zero_y),
                c(WIDTH - MARGIN_RIGHT),
                c(zero_y)
            );
            for (i, t) in traces.iter().enumerate() {
                let color = SERIES_COLORS[i % SERIES_COLORS.len()];
                for &(x, y) in &t.points {
                    let _ = write!(
                        out,
                        r#"<circle cx="{}" cy="{}" r="1.8" fill="{}"/>"#,
                        c(frame.x(x)),
                        c(frame.y(y)),
                        color
                    );
                }
            }
            legend(
                &mut out,
                &traces
                    .iter()
                    .enumerate()
                    .map(|(i, t)| (t.label.clone(), SERIES_COLORS[i % SERIES_COLORS.len()]))
                    .collect::<Vec<_>>(),
            );
            out.push_str("</svg>");
            Ok(out)
        }
        PlotSpec::ScenarioBars { title, groups } => {
            if groups.is_empty() {
                return Err(ReportError::EmptyPlot);
            }
            let mut y_min = 0.0f64;
            let mut y_max = 0.0f64;
            for g in groups {
                for v in [g.model1, g.model2, g.benchmark] {
                    if !v.is_finite() {
                        return Err(ReportError::EmptyPlot);
                    }
                    y_min = y_min.min(v);
                    y_max = y_max.max(v);
                }
            }
            let frame = Frame::from_bounds(0.0, groups.len() as f64, y_min, y_max)?;
            let mut out = String::new();
            open_svg(&mut out, title);
            draw_axes(&mut out, &frame, "", "fade (Ah/cycle)");
            let zero_y = frame.y(0.0);
            let group_width = (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / groups.len() as f64;
            let bar_width = group_width / 4.0;
            for (gi, g) in groups.iter().enumerate() {
                let gx = MARGIN_LEFT + gi as f64 * group_width;
                for (bi, v) in [g.model1, g.model2, g.benchmark].iter().enumerate() {
                    let x = gx + group_width / 8.0 + bi as f64 * bar_width;
                    let vy = frame.y(*v);
                    let (top, height) = if vy <= zero_y {
                        (vy, zero_y - vy)
                    } else {
                        (zero_y, vy - zero_y)
                    };
                    let _ = write!(
                        out,
                        r#"<rect class="bar" x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#,
                        c(x),
                        c(top),
                        c(bar_width * 0.9),
                        c(height),
                        BAR_COLORS[bi]
                    );
                }
                let _ = write!(
                    out,
                    r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
                    c(gx + group_width / 2.0),
                    c(HEIGHT - MARGIN_BOTTOM + 20.0),
                    xml_escape(&g.label)
                );
            }
            legend(
                &mut out,
                &BAR_LABELS
                    .iter()
                    .zip(BAR_COLORS.iter())
                    .map(|(l, c)| (l.to_string(), *c))
                    .collect::<Vec<_>>(),
            );
            out.push_str("</svg>");
            Ok(out)
        }
    }
}
