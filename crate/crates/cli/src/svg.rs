//! Minimal self-contained SVG line chart.
//!
//! Inline attributes only, generic font family, no timestamps: the same
//! series always renders to the same bytes.

use std::fmt::Write;

use crate::report::fmt_sig;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 56.0;

pub struct LineChart<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    /// `(x, y)` pairs in data coordinates, in drawing order.
    pub points: &'a [(f64, f64)],
    /// Highlighted optimum, drawn as a diamond.
    pub marker: Option<(f64, f64)>,
}

fn px(v: f64) -> String {
    format!("{v:.2}")
}

/// Round ticks covering [lo, hi] in steps of a 1/2/5 multiple.
fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let raw_step = span / target as f64;
    let power = 10f64.powf(raw_step.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * power)
        .find(|&s| span / s <= target as f64)
        .unwrap_or(power * 10.0);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        // snap near-zero ticks to exactly zero
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

impl LineChart<'_> {
    pub fn render(&self) -> String {
        let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in self.points {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
        if !x_min.is_finite() {
            x_min = 0.0;
            x_max = 1.0;
            y_min = 0.0;
            y_max = 1.0;
        }
        if x_max == x_min {
            x_max = x_min + 1.0;
        }
        if y_max == y_min {
            y_max = y_min + 1.0;
        }
        let y_pad = (y_max - y_min) * 0.05;
        let (y_lo, y_hi) = (y_min - y_pad, y_max + y_pad);

        let x_of = |x: f64| MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w;
        let y_of = |y: f64| MARGIN_TOP + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h;

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
             viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">"
        );
        let _ = writeln!(
            svg,
            "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"16\">{}</text>",
            px(WIDTH / 2.0),
            escape(self.title)
        );

        // axes
        let x0 = px(MARGIN_LEFT);
        let y0 = px(MARGIN_TOP + plot_h);
        let _ = writeln!(
            svg,
            "<line x1=\"{x0}\" y1=\"{}\" x2=\"{x0}\" y2=\"{y0}\" stroke=\"black\"/>",
            px(MARGIN_TOP)
        );
        let _ = writeln!(
            svg,
            "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{}\" y2=\"{y0}\" stroke=\"black\"/>",
            px(MARGIN_LEFT + plot_w)
        );

        for t in ticks(x_min, x_max, 6) {
            let x = px(x_of(t));
            let _ = writeln!(
                svg,
                "<line x1=\"{x}\" y1=\"{y0}\" x2=\"{x}\" y2=\"{}\" stroke=\"black\"/>",
                px(MARGIN_TOP + plot_h + 5.0)
            );
            let _ = writeln!(
                svg,
                "<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\" font-size=\"11\">{}</text>",
                px(MARGIN_TOP + plot_h + 20.0),
                fmt_sig(t)
            );
        }
        for t in ticks(y_lo, y_hi, 6) {
            let y = px(y_of(t));
            let _ = writeln!(
                svg,
                "<line x1=\"{}\" y1=\"{y}\" x2=\"{x0}\" y2=\"{y}\" stroke=\"black\"/>",
                px(MARGIN_LEFT - 5.0)
            );
            let _ = writeln!(
                svg,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"11\">{}</text>",
                px(MARGIN_LEFT - 9.0),
                px(y_of(t) + 4.0),
                fmt_sig(t)
            );
        }

        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\">{}</text>",
            px(MARGIN_LEFT + plot_w / 2.0),
            px(HEIGHT - 12.0),
            escape(self.x_label)
        );
        let _ = writeln!(
            svg,
            "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\" \
             transform=\"rotate(-90 18 {})\">{}</text>",
            px(MARGIN_TOP + plot_h / 2.0),
            px(MARGIN_TOP + plot_h / 2.0),
            escape(self.y_label)
        );

        // zero line when the range crosses zero
        if y_lo < 0.0 && y_hi > 0.0 {
            let y = px(y_of(0.0));
            let _ = writeln!(
                svg,
                "<line x1=\"{x0}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#cccccc\" \
                 stroke-dasharray=\"4 3\"/>",
                px(MARGIN_LEFT + plot_w)
            );
        }

        let path: Vec<String> = self
            .points
            .iter()
            .map(|&(x, y)| format!("{},{}", px(x_of(x)), px(y_of(y))))
            .collect();
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#2b6cb0\" stroke-width=\"1.5\"/>",
            path.join(" ")
        );

        if let Some((mx, my)) = self.marker {
            let cx = x_of(mx);
            let cy = y_of(my);
            let r = 6.0;
            let _ = writeln!(
                svg,
                "<path d=\"M {} {} L {} {} L {} {} L {} {} Z\" fill=\"#dd6b20\" \
                 stroke=\"black\" stroke-width=\"0.8\"/>",
                px(cx),
                px(cy - r),
                px(cx + r),
                px(cy),
                px(cx),
                px(cy + r),
                px(cx - r),
                px(cy)
            );
        }

        svg.push_str("</svg>\n");
        svg
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_deterministically_with_marker() {
        let points: Vec<(f64, f64)> = (0..=100)
            .map(|i| {
                let tau = 0.5 + 0.005 * i as f64;
                (tau, 100.0 - (tau - 0.7) * (tau - 0.7) * 1000.0)
            })
            .collect();
        let chart = LineChart {
            title: "total value vs threshold",
            x_label: "rejection threshold",
            y_label: "total value",
            points: &points,
            marker: Some((0.7, 100.0)),
        };
        let a = chart.render();
        let b = chart.render();
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.contains("polyline"));
        assert!(a.contains("path d="));
        assert!(!a.to_lowercase().contains("date"));
    }

    #[test]
    fn tick_spacing_is_round() {
        let got = ticks(0.5, 1.0, 6);
        let want = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
        assert_eq!(got.len(), want.len(), "{got:?}");
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-9, "{g} vs {w}");
            assert_eq!(fmt_sig(*g), fmt_sig(w), "labels must match");
        }
        let t = ticks(-1234.0, 987.0, 6);
        assert!(t.contains(&0.0));
        assert!(t.len() >= 4 && t.len() <= 8);
    }
}
