//! Minimal self-contained SVG line plots.

use std::fmt::Write;

pub const ORANGE: &str = "#e8812a";
pub const BLUE: &str = "#3b75af";
pub const BLACK: &str = "#222222";
pub const GREY: &str = "#888888";
/// m_f = -1, 0, +1.
pub const SPIN_COLORS: [&str; 3] = ["#d62728", "#1f77b4", "#2ca02c"];

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

pub enum Layer {
    Line {
        label: String,
        color: &'static str,
        points: Vec<(f64, f64)>,
        dashed: bool,
    },
    Markers {
        label: String,
        color: &'static str,
        points: Vec<(f64, f64)>,
        radius: f64,
    },
    Band {
        label: String,
        color: &'static str,
        x: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
}

impl Layer {
    fn label(&self) -> &str {
        match self {
            Layer::Line { label, .. } | Layer::Markers { label, .. } | Layer::Band { label, .. } => label,
        }
    }

    fn color(&self) -> &'static str {
        match self {
            Layer::Line { color, .. } | Layer::Markers { color, .. } | Layer::Band { color, .. } => color,
        }
    }

    fn extent(&self) -> Vec<(f64, f64)> {
        match self {
            Layer::Line { points, .. } | Layer::Markers { points, .. } => points.clone(),
            Layer::Band { x, lower, upper, .. } => x
                .iter()
                .zip(lower)
                .map(|(a, b)| (*a, *b))
                .chain(x.iter().zip(upper).map(|(a, b)| (*a, *b)))
                .collect(),
        }
    }
}

pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
    pub layers: Vec<Layer>,
}

fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        return format!("{v:.1e}");
    }
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Roughly five round-numbered ticks covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .min_by(|a, b| (a / raw).ln().abs().total_cmp(&(b / raw).ln().abs()))
        .unwrap_or(mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * lo.abs().max(1.0) {
        let pad = 0.5 * lo.abs().max(1.0);
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x_range: None,
            y_range: None,
            layers: Vec::new(),
        }
    }

    pub fn x_range(mut self, lo: f64, hi: f64) -> Self {
        self.x_range = Some((lo, hi));
        self
    }

    pub fn y_range(mut self, lo: f64, hi: f64) -> Self {
        self.y_range = Some((lo, hi));
        self
    }

    pub fn layer(mut self, layer: Layer) -> Self {
        self.layers.push(layer);
        self
    }

    pub fn render(&self) -> String {
        let all: Vec<(f64, f64)> = self.layers.iter().flat_map(|l| l.extent()).collect();
        let (x0, x1) = self.x_range.unwrap_or_else(|| {
            let (lo, hi) = range(all.iter().map(|p| p.0));
            // data x ranges are usually exact grids; no padding
            let pad = (hi - lo) / 1.1 * 0.05;
            (lo + pad, hi - pad)
        });
        let (y0, y1) = self.y_range.unwrap_or_else(|| range(all.iter().map(|p| p.1)));
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<defs><clipPath id="area"><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/></clipPath></defs>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );

        // axes and ticks
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="{BLACK}"/>"#
        );
        for t in ticks(x0, x1) {
            let x = sx(t);
            let _ = writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{BLACK}"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                TOP + ph,
                TOP + ph - 5.0,
                TOP + ph + 18.0,
                fmt_num(t)
            );
        }
        for t in ticks(y0, y1) {
            let y = sy(t);
            let _ = writeln!(
                s,
                r#"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{BLACK}"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT + 5.0,
                LEFT - 6.0,
                y + 4.0,
                fmt_num(t)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 15.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        let _ = writeln!(s, r#"<g clip-path="url(#area)">"#);
        for layer in &self.layers {
            match layer {
                Layer::Band { color, x, lower, upper, .. } => {
                    let mut d = String::new();
                    for (i, (xi, yi)) in x.iter().zip(upper).enumerate() {
                        let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, sx(*xi), sy(*yi));
                    }
                    for (xi, yi) in x.iter().zip(lower).rev() {
                        let _ = write!(d, "L{:.2},{:.2} ", sx(*xi), sy(*yi));
                    }
                    let _ = writeln!(
                        s,
                        r#"<path d="{}Z" fill="{color}" fill-opacity="0.35" stroke="{color}" stroke-width="0.8"/>"#,
                        d
                    );
                }
                Layer::Line { color, points, dashed, .. } => {
                    let pts: Vec<String> = points
                        .iter()
                        .filter(|p| p.0.is_finite() && p.1.is_finite())
                        .map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1)))
                        .collect();
                    let dash = if *dashed { r#" stroke-dasharray="6 4""# } else { "" };
                    let _ = writeln!(
                        s,
                        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"{dash}/>"#,
                        pts.join(" ")
                    );
                }
                Layer::Markers { color, points, radius, .. } => {
                    for p in points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
                        let _ = writeln!(
                            s,
                            r#"<circle cx="{:.2}" cy="{:.2}" r="{radius}" fill="{color}"/>"#,
                            sx(p.0),
                            sy(p.1)
                        );
                    }
                }
            }
        }
        let _ = writeln!(s, "</g>");

        // legend
        let lx = LEFT + pw + 12.0;
        for (i, layer) in self.layers.iter().filter(|l| !l.label().is_empty()).enumerate() {
            let y = TOP + 10.0 + 18.0 * i as f64;
            let _ = writeln!(
                s,
                r#"<rect x="{lx:.2}" y="{:.2}" width="14" height="8" fill="{}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
                y - 7.0,
                layer.color(),
                lx + 20.0,
                y + 1.0,
                escape(layer.label())
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round() {
        assert_eq!(ticks(0.0, 1.05), vec![0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0]);
        assert_eq!(ticks(-3.0, 3.0), vec![-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(0.6000000000000001), "0.6");
        assert_eq!(fmt_num(-2.5), "-2.5");
        assert_eq!(fmt_num(12.0), "12");
        assert_eq!(fmt_num(1e14), "1.0e14");
    }

    #[test]
    fn renders_well_formed_svg() {
        let svg = Plot::new("t <1>", "x", "y")
            .y_range(0.0, 1.05)
            .layer(Layer::Band {
                label: "band".into(),
                color: ORANGE,
                x: vec![0.0, 1.0],
                lower: vec![0.1, 0.2],
                upper: vec![0.3, 0.4],
            })
            .layer(Layer::Line {
                label: "line".into(),
                color: BLUE,
                points: vec![(0.0, 0.5), (1.0, f64::NAN), (1.0, 0.7)],
                dashed: true,
            })
            .render();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("t &lt;1&gt;"));
        assert!(!svg.contains("NaN"));
        assert_eq!(svg.matches("<polyline").count(), 1);
    }
}
