//! Minimal SVG charts: grouped bars and polylines on a shared frame.

use std::fmt::Write;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 160.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

struct Frame {
    lo: f64,
    hi: f64,
}

impl Frame {
    fn new<'a>(values: impl Iterator<Item = &'a f64>) -> Self {
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        for &v in values.filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi - lo < 1e-12 {
            hi = lo + 1.0;
        }
        Self { lo, hi }
    }

    fn y(&self, v: f64) -> f64 {
        let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
        MARGIN_T + plot_h * (self.hi - v) / (self.hi - self.lo)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn open(out: &mut String, title: &str, note: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, "<!-- {} -->", escape(note));
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="22" font-size="14" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(title));
}

fn axes(out: &mut String, frame: &Frame, y_label: &str) {
    let x0 = MARGIN_L;
    let x1 = WIDTH - MARGIN_R;
    let _ = writeln!(
        out,
        r#"<line x1="{x0}" y1="{MARGIN_T}" x2="{x0}" y2="{}" stroke="black"/>"#,
        HEIGHT - MARGIN_B
    );
    let zero = frame.y(0.0);
    let _ = writeln!(out, r##"<line x1="{x0}" y1="{zero:.2}" x2="{x1}" y2="{zero:.2}" stroke="#444"/>"##);
    for i in 0..=4 {
        let v = frame.lo + (frame.hi - frame.lo) * i as f64 / 4.0;
        let y = frame.y(v);
        let _ = writeln!(out, r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#, x0 - 4.0);
        let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{v:.3}</text>"#, x0 - 6.0, y + 4.0);
    }
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" transform="rotate(-90 16 {:.2})" text-anchor="middle">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
}

fn legend(out: &mut String, series: &[Series]) {
    for (i, s) in series.iter().enumerate() {
        let y = MARGIN_T + 16.0 * i as f64;
        let x = WIDTH - MARGIN_R + 12.0;
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(out, r#"<rect x="{x}" y="{y}" width="10" height="10" fill="{color}"/>"#);
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, x + 14.0, y + 9.0, escape(&s.name));
    }
}

/// One group of bars per category, one bar per series.
pub fn grouped_bar_chart(title: &str, note: &str, y_label: &str, categories: &[String], series: &[Series]) -> String {
    let mut out = String::new();
    open(&mut out, title, note);
    let frame = Frame::new(series.iter().flat_map(|s| s.values.iter()));
    axes(&mut out, &frame, y_label);
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let group_w = plot_w / categories.len().max(1) as f64;
    let bar_w = group_w * 0.8 / series.len().max(1) as f64;
    for (c, label) in categories.iter().enumerate() {
        let gx = MARGIN_L + group_w * c as f64 + group_w * 0.1;
        for (k, s) in series.iter().enumerate() {
            let v = s.values.get(c).copied().unwrap_or(0.0);
            if !v.is_finite() {
                continue;
            }
            let (ya, yb) = (frame.y(v), frame.y(0.0));
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                gx + bar_w * k as f64,
                ya.min(yb),
                bar_w,
                (ya - yb).abs(),
                PALETTE[k % PALETTE.len()]
            );
        }
        let lx = gx + group_w * 0.4;
        let ly = HEIGHT - MARGIN_B + 12.0;
        let _ = writeln!(
            out,
            r#"<text x="{lx:.2}" y="{ly:.2}" text-anchor="end" transform="rotate(-60 {lx:.2} {ly:.2})">{}</text>"#,
            escape(label)
        );
    }
    legend(&mut out, series);
    out.push_str("</svg>\n");
    out
}

/// One polyline per series over x = 0, 1, 2, ...
pub fn line_chart(title: &str, note: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let mut out = String::new();
    open(&mut out, title, note);
    let frame = Frame::new(series.iter().flat_map(|s| s.values.iter()));
    axes(&mut out, &frame, y_label);
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let n = series.iter().map(|s| s.values.len()).max().unwrap_or(0);
    let dx = plot_w / (n.max(2) - 1) as f64;
    for (k, s) in series.iter().enumerate() {
        let points: Vec<String> = s
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(i, &v)| format!("{:.2},{:.2}", MARGIN_L + dx * i as f64, frame.y(v)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            PALETTE[k % PALETTE.len()],
            points.join(" ")
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{}" text-anchor="middle">{} (0–{})</text>"#,
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 20.0,
        escape(x_label),
        n.saturating_sub(1)
    );
    legend(&mut out, series);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two() -> Vec<Series> {
        vec![
            Series { name: "a".into(), values: vec![1.0, -2.0, 3.0] },
            Series { name: "b<c".into(), values: vec![0.5, 0.5, f64::NAN] },
        ]
    }

    #[test]
    fn bars_per_category_and_series() {
        let cats: Vec<String> = (0..3).map(|i| i.to_string()).collect();
        let svg = grouped_bar_chart("t", "note", "y", &cats, &two());
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        // background + 5 finite bars + 2 legend swatches
        assert_eq!(svg.matches("<rect").count(), 8);
        assert!(svg.contains("b&lt;c"));
    }

    #[test]
    fn one_polyline_per_series() {
        let svg = line_chart("t", "n", "x", "y", &two());
        assert_eq!(svg.matches("<polyline").count(), 2);
    }
}
