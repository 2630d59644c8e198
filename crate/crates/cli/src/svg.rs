//! Minimal standalone SVG line plots and heatmaps.
//!
//! Coordinates are printed with fixed precision so the same data always
//! produces the same bytes.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 44.0;
const BOTTOM: f64 = 56.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

/// Shaded vertical band, e.g. a light-cone region.
pub struct Band {
    pub x0: f64,
    pub x1: f64,
    pub label: String,
    pub color: &'static str,
}

/// Horizontal reference line.
pub struct HLine {
    pub y: f64,
    pub label: String,
}

pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub bands: Vec<Band>,
    pub hlines: Vec<HLine>,
    /// Fixed y range; otherwise taken from the data.
    pub y_range: Option<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn nice_ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / count as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        (WIDTH - RIGHT + LEFT) / 2.0,
        escape(title)
    );
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }

    fn axes(&self, out: &mut String, x_label: &str, y_label: &str) {
        let (x0, x1) = (LEFT, WIDTH - RIGHT);
        let (y0, y1) = (HEIGHT - BOTTOM, TOP);
        let _ = writeln!(
            out,
            r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            x1 - x0,
            y0 - y1
        );
        for t in nice_ticks(self.x.0, self.x.1, 8) {
            let p = self.px(t);
            let _ = writeln!(
                out,
                r#"<line x1="{p:.2}" y1="{y0:.2}" x2="{p:.2}" y2="{:.2}" stroke="black"/><text x="{p:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                y0 + 5.0,
                y0 + 18.0,
                tick_label(t)
            );
        }
        for t in nice_ticks(self.y.0, self.y.1, 6) {
            let p = self.py(t);
            let _ = writeln!(
                out,
                r#"<line x1="{:.2}" y1="{p:.2}" x2="{x0:.2}" y2="{p:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                x0 - 5.0,
                x0 - 8.0,
                p + 4.0,
                tick_label(t)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            HEIGHT - 14.0,
            escape(x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(y_label)
        );
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(hi > lo) {
        (lo - 0.5, lo + 0.5)
    } else {
        (lo, hi)
    }
}

impl LinePlot {
    pub fn render(&self) -> String {
        let all: Vec<(f64, f64)> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().copied())
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .collect();
        let xmin = all.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let xmax = all.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let x = if all.is_empty() { (0.0, 1.0) } else { padded(xmin, xmax) };
        let y = self.y_range.unwrap_or_else(|| {
            let lo = all.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            let hi = all.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            if all.is_empty() {
                (0.0, 1.0)
            } else {
                padded(lo, hi)
            }
        });
        let frame = Frame { x, y };

        let mut out = String::new();
        header(&mut out, &self.title);
        for band in &self.bands {
            let a = frame.px(band.x0.clamp(x.0, x.1));
            let b = frame.px(band.x1.clamp(x.0, x.1));
            if b - a <= 0.0 {
                continue;
            }
            let _ = writeln!(
                out,
                r#"<rect x="{a:.2}" y="{TOP:.2}" width="{:.2}" height="{:.2}" fill="{}" fill-opacity="0.18"/><text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{}</text>"#,
                b - a,
                HEIGHT - TOP - BOTTOM,
                band.color,
                (a + b) / 2.0,
                TOP + 12.0,
                escape(&band.label)
            );
        }
        frame.axes(&mut out, &self.x_label, &self.y_label);
        for h in &self.hlines {
            if h.y < y.0 || h.y > y.1 {
                continue;
            }
            let p = frame.py(h.y);
            let _ = writeln!(
                out,
                r#"<line x1="{LEFT:.2}" y1="{p:.2}" x2="{:.2}" y2="{p:.2}" stroke="gray" stroke-dasharray="2,3"/><text x="{:.2}" y="{:.2}" font-size="10" fill="gray">{}</text>"#,
                WIDTH - RIGHT,
                LEFT + 4.0,
                p - 3.0,
                escape(&h.label)
            );
        }
        for (k, s) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let pts: Vec<String> = s
                .points
                .iter()
                .filter(|(a, b)| a.is_finite() && b.is_finite())
                .map(|&(a, b)| format!("{:.2},{:.2}", frame.px(a), frame.py(b.clamp(y.0, y.1))))
                .collect();
            if pts.is_empty() {
                continue;
            }
            let dash = if s.dashed { r#" stroke-dasharray="6,4""# } else { "" };
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.6"{dash} points="{}"/>"#,
                pts.join(" ")
            );
            let ly = TOP + 14.0 + 16.0 * k as f64;
            let lx = WIDTH - RIGHT + 10.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.2}" y="{ly:.2}">{}</text>"#,
                ly - 4.0,
                lx + 18.0,
                ly - 4.0,
                lx + 24.0,
                escape(&s.name)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

pub struct Heatmap {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `values[i][j]` at `(xs[i], ys[j])`.
    pub values: Vec<Vec<f64>>,
}

/// Blue → white → red ramp on `[0, 1]`.
fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let (r, g, b) = if t < 0.5 {
        let u = t / 0.5;
        (u, u, 1.0)
    } else {
        let u = (t - 0.5) / 0.5;
        (1.0, 1.0 - u, 1.0 - u)
    };
    format!("#{:02x}{:02x}{:02x}", (r * 255.0).round() as u8, (g * 255.0).round() as u8, (b * 255.0).round() as u8)
}

impl Heatmap {
    pub fn render(&self) -> String {
        let edges = |v: &[f64]| -> (f64, f64, f64) {
            let step = if v.len() > 1 { v[1] - v[0] } else { 1.0 };
            (v[0] - step / 2.0, v[v.len() - 1] + step / 2.0, step)
        };
        let mut out = String::new();
        header(&mut out, &self.title);
        if self.xs.is_empty() || self.ys.is_empty() {
            out.push_str("</svg>\n");
            return out;
        }
        let (x0, x1, dx) = edges(&self.xs);
        let (y0, y1, dy) = edges(&self.ys);
        let frame = Frame { x: (x0, x1), y: (y0, y1) };
        let lo = self.values.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        let hi = self.values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        for (i, &x) in self.xs.iter().enumerate() {
            for (j, &y) in self.ys.iter().enumerate() {
                let a = frame.px(x - dx / 2.0);
                let b = frame.px(x + dx / 2.0);
                let top = frame.py(y + dy / 2.0);
                let bottom = frame.py(y - dy / 2.0);
                let _ = writeln!(
                    out,
                    r#"<rect x="{a:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                    b - a + 0.3,
                    bottom - top + 0.3,
                    ramp((self.values[i][j] - lo) / span)
                );
            }
        }
        frame.axes(&mut out, &self.x_label, &self.y_label);
        // colour bar
        let bx = WIDTH - RIGHT + 24.0;
        let h = HEIGHT - TOP - BOTTOM;
        for k in 0..50 {
            let t = k as f64 / 49.0;
            let _ = writeln!(
                out,
                r#"<rect x="{bx:.2}" y="{:.2}" width="16" height="{:.2}" fill="{}"/>"#,
                TOP + h * (1.0 - t) - h / 50.0,
                h / 50.0 + 0.3,
                ramp(t)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}">{}</text><text x="{:.2}" y="{:.2}">{}</text>"#,
            bx + 22.0,
            TOP + 10.0,
            tick_label(hi),
            bx + 22.0,
            TOP + h,
            tick_label(lo)
        );
        out.push_str("</svg>\n");
        out
    }
}
