//! Hand-rolled SVG scatter plots on a fixed 800×600 canvas.
//!
//! Layout: plot area inset 80px left, 30px right, 50px top, 70px bottom.
//! Points are steel-blue circles of radius 4; guides are horizontal lines
//! (dashed red at ±0.95, dotted dark red at ±0.995 on unexpectedness
//! plots); flagged points carry their value as text.

use std::fmt::Write as _;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 70.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Guide {
    pub y: f64,
    pub color: &'static str,
    /// SVG `stroke-dasharray`, empty for solid.
    pub dash: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub x: f64,
    pub y: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub points: Vec<(f64, f64)>,
    pub guides: Vec<Guide>,
    pub annotations: Vec<Annotation>,
    /// Draw the y = x reference line.
    pub diagonal: bool,
    /// Join points in order with a polyline.
    pub connect: bool,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let f = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    };
    f * mag
}

fn ticks(lo: f64, hi: f64) -> (Vec<f64>, usize) {
    let step = nice_step(hi - lo);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let mut out = Vec::new();
    let mut k = (lo / step).ceil() as i64;
    loop {
        let v = k as f64 * step;
        if v > hi + 1e-9 * step {
            break;
        }
        out.push(v);
        k += 1;
    }
    (out, decimals)
}

fn num(v: f64) -> String {
    format!("{:.2}", v + 0.0)
}

/// Value label for a flagged point, with enough digits that values short of
/// ±1 never print as ±1.
pub fn format_value(u: f64) -> String {
    let mut digits = 3;
    let mut s = format!("{:.3}", u + 0.0);
    while u.abs() < 1.0 && s.trim_start_matches('-').starts_with('1') && digits < 9 {
        digits += 1;
        s = format!("{:.*}", digits, u + 0.0);
    }
    s
}

/// Range of `values` padded by 5%, or `fallback` when empty.
pub fn padded_range(values: impl IntoIterator<Item = f64>, fallback: (f64, f64)) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() {
        return fallback;
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

impl Figure {
    fn sx(&self, x: f64) -> f64 {
        let (lo, hi) = self.x_range;
        LEFT + (x - lo) / (hi - lo) * (WIDTH - LEFT - RIGHT)
    }

    fn sy(&self, y: f64) -> f64 {
        let (lo, hi) = self.y_range;
        HEIGHT - BOTTOM - (y - lo) / (hi - lo) * (HEIGHT - TOP - BOTTOM)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let (x0, x1) = (LEFT, WIDTH - RIGHT);
        let (y0, y1) = (TOP, HEIGHT - BOTTOM);
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="600" viewBox="0 0 800 600" font-family="sans-serif">"#
        );
        let _ = writeln!(
            s,
            r#"<rect x="0" y="0" width="800" height="600" fill="white"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="400" y="30" text-anchor="middle" font-size="18">{}</text>"#,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            num(x0),
            num(y0),
            num(x1 - x0),
            num(y1 - y0)
        );

        let (xt, xd) = ticks(self.x_range.0, self.x_range.1);
        for v in xt {
            let px = num(self.sx(v));
            let _ = writeln!(
                s,
                r#"<line x1="{px}" y1="{}" x2="{px}" y2="{}" stroke="black"/>"#,
                num(y1),
                num(y1 + 5.0)
            );
            let _ = writeln!(
                s,
                r#"<text x="{px}" y="{}" text-anchor="middle" font-size="12">{:.*}</text>"#,
                num(y1 + 20.0),
                xd,
                v + 0.0
            );
        }
        let (yt, yd) = ticks(self.y_range.0, self.y_range.1);
        for v in yt {
            let py = num(self.sy(v));
            let _ = writeln!(
                s,
                r#"<line x1="{}" y1="{py}" x2="{}" y2="{py}" stroke="black"/>"#,
                num(x0 - 5.0),
                num(x0)
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{py}" text-anchor="end" dominant-baseline="middle" font-size="12">{:.*}</text>"#,
                num(x0 - 8.0),
                yd,
                v + 0.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#,
            num(0.5 * (x0 + x1)),
            num(HEIGHT - 20.0),
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="20" y="{}" text-anchor="middle" font-size="14" transform="rotate(-90 20 {})">{}</text>"#,
            num(0.5 * (y0 + y1)),
            num(0.5 * (y0 + y1)),
            escape(&self.y_label)
        );

        for g in &self.guides {
            if g.y < self.y_range.0 || g.y > self.y_range.1 {
                continue;
            }
            let py = num(self.sy(g.y));
            let dash = if g.dash.is_empty() {
                String::new()
            } else {
                format!(r#" stroke-dasharray="{}""#, g.dash)
            };
            let _ = writeln!(
                s,
                r#"<line class="guide" x1="{}" y1="{py}" x2="{}" y2="{py}" stroke="{}"{dash}/>"#,
                num(x0),
                num(x1),
                g.color
            );
        }
        if self.diagonal {
            let lo = self.x_range.0.max(self.y_range.0);
            let hi = self.x_range.1.min(self.y_range.1);
            if lo < hi {
                let _ = writeln!(
                    s,
                    r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="gray"/>"#,
                    num(self.sx(lo)),
                    num(self.sy(lo)),
                    num(self.sx(hi)),
                    num(self.sy(hi))
                );
            }
        }
        if self.connect && self.points.len() > 1 {
            let pts: Vec<String> = self
                .points
                .iter()
                .map(|&(x, y)| format!("{},{}", num(self.sx(x)), num(self.sy(y))))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="steelblue"/>"#,
                pts.join(" ")
            );
        }
        for &(x, y) in &self.points {
            if !x.is_finite() || !y.is_finite() {
                continue;
            }
            let _ = writeln!(
                s,
                r#"<circle cx="{}" cy="{}" r="4" fill="steelblue"/>"#,
                num(self.sx(x)),
                num(self.sy(y))
            );
        }
        for a in &self.annotations {
            let _ = writeln!(
                s,
                r#"<text class="annotation" x="{}" y="{}" font-size="11" fill="darkred">{}</text>"#,
                num(self.sx(a.x) + 6.0),
                num(self.sy(a.y) - 6.0),
                escape(&a.text)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

/// U against one input coordinate, guides at ±0.95 and ±0.995, flagged
/// values annotated.
pub fn unexpectedness_figure(title: &str, x_label: &str, points: &[(f64, f64)]) -> Figure {
    let level = stochdiag_core::diagnostics::FLAG_LEVEL;
    let strong = stochdiag_core::diagnostics::STRONG_FLAG_LEVEL;
    let mut guides = vec![Guide {
        y: 0.0,
        color: "lightgray",
        dash: "",
    }];
    for sign in [1.0, -1.0] {
        guides.push(Guide {
            y: sign * level,
            color: "red",
            dash: "6,4",
        });
        guides.push(Guide {
            y: sign * strong,
            color: "darkred",
            dash: "2,3",
        });
    }
    Figure {
        title: title.into(),
        x_label: x_label.into(),
        y_label: "unexpectedness U".into(),
        x_range: padded_range(points.iter().map(|p| p.0), (0.0, 1.0)),
        y_range: (-1.1, 1.1),
        points: points.to_vec(),
        guides,
        annotations: points
            .iter()
            .filter(|p| p.1.abs() > level)
            .map(|&(x, y)| Annotation {
                x,
                y,
                text: format_value(y),
            })
            .collect(),
        diagonal: false,
        connect: false,
    }
}

fn symmetric_range(values: impl Iterator<Item = f64>, min: f64) -> (f64, f64) {
    let m = values
        .filter(|v| v.is_finite())
        .fold(min, |a, v| a.max(1.1 * v.abs()));
    (-m, m)
}

fn two_sd_guides() -> Vec<Guide> {
    vec![
        Guide {
            y: 0.0,
            color: "lightgray",
            dash: "",
        },
        Guide {
            y: 2.0,
            color: "red",
            dash: "6,4",
        },
        Guide {
            y: -2.0,
            color: "red",
            dash: "6,4",
        },
    ]
}

/// Standardized errors against an input coordinate, guides at 0 and ±2.
pub fn errors_figure(title: &str, x_label: &str, points: &[(f64, f64)]) -> Figure {
    Figure {
        title: title.into(),
        x_label: x_label.into(),
        y_label: "standardized error".into(),
        x_range: padded_range(points.iter().map(|p| p.0), (0.0, 1.0)),
        y_range: symmetric_range(points.iter().map(|p| p.1), 3.0),
        points: points.to_vec(),
        guides: two_sd_guides(),
        ..Figure::default()
    }
}

pub fn qq_figure(title: &str, points: &[(f64, f64)]) -> Figure {
    let r = symmetric_range(points.iter().flat_map(|p| [p.0, p.1]), 3.0);
    Figure {
        title: title.into(),
        x_label: "theoretical N(0,1) quantile".into(),
        y_label: "sample quantile".into(),
        x_range: r,
        y_range: r,
        points: points.to_vec(),
        diagonal: true,
        ..Figure::default()
    }
}

pub fn coverage_figure(title: &str, points: &[(f64, f64)]) -> Figure {
    Figure {
        title: title.into(),
        x_label: "nominal credible level".into(),
        y_label: "empirical coverage".into(),
        x_range: (0.0, 1.0),
        y_range: (0.0, 1.0),
        points: points.to_vec(),
        diagonal: true,
        connect: true,
        ..Figure::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_labels() {
        assert_eq!(format_value(-0.999), "-0.999");
        assert_eq!(format_value(0.9512), "0.951");
        assert_eq!(format_value(-0.99991), "-0.9999");
        assert_eq!(format_value(-1.0), "-1.000");
    }

    #[test]
    fn tick_layout() {
        let (t, d) = ticks(-1.1, 1.1);
        assert_eq!(d, 1);
        assert_eq!(t.first().copied(), Some(-1.0));
        assert!(t.contains(&0.0) || t.iter().any(|v| v.abs() < 1e-12));
        let (t, d) = ticks(0.0, 1.0);
        assert_eq!(d, 1);
        assert_eq!(t.len(), 6);
    }

    #[test]
    fn empty_figure_has_guides_only() {
        let svg = unexpectedness_figure("t", "x1", &[]).render();
        assert_eq!(svg.matches("class=\"guide\"").count(), 5);
        assert!(!svg.contains("<circle"));
        assert!(svg.contains(r#"viewBox="0 0 800 600""#));
    }
}
