//! Minimal SVG charts: line panels and a phase wheel.

use std::fmt::Write;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

pub fn color(k: usize) -> &'static str {
    PALETTE[k % PALETTE.len()]
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self { label: label.into(), points }
    }
}

/// Placement of a panel inside the document.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick(v: f64) -> String {
    if v == 0.0 || (1e-2..1e4).contains(&v.abs()) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.1e}")
    }
}

fn extent(series: &[Series], pick: fn(&(f64, f64)) -> f64) -> (f64, f64) {
    let (lo, hi) = series
        .iter()
        .flat_map(|s| s.points.iter().map(pick))
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// One line chart with axes, five ticks per axis and a legend.
pub fn line_panel(frame: Frame, title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let (x0, x1) = extent(series, |p| p.0);
    let (y0, y1) = extent(series, |p| p.1);
    let (left, right, top, bottom) = (frame.x + 60.0, frame.x + frame.w - 110.0, frame.y + 28.0, frame.y + frame.h - 40.0);
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * (right - left);
    let sy = |y: f64| bottom - (y - y0) / (y1 - y0) * (bottom - top);
    let mut g = String::new();
    let _ = writeln!(
        g,
        r#"<text x="{:.1}" y="{:.1}" font-size="14" text-anchor="middle">{}</text>"#,
        (left + right) / 2.0,
        frame.y + 16.0,
        esc(title)
    );
    let _ = writeln!(
        g,
        r#"<rect x="{left:.1}" y="{top:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        right - left,
        bottom - top
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let _ = writeln!(
            g,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"#,
            sx(xv),
            bottom + 14.0,
            tick(xv)
        );
        let _ = writeln!(
            g,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{}</text>"#,
            left - 4.0,
            sy(yv) + 3.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        g,
        r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
        (left + right) / 2.0,
        bottom + 30.0,
        esc(xlabel)
    );
    let _ = writeln!(
        g,
        r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle" transform="rotate(-90 {:.1} {:.1})">{}</text>"#,
        frame.x + 14.0,
        (top + bottom) / 2.0,
        frame.x + 14.0,
        (top + bottom) / 2.0,
        esc(ylabel)
    );
    for (k, s) in series.iter().enumerate() {
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            g,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            color(k),
            pts.join(" ")
        );
        let ly = top + 12.0 + 14.0 * k as f64;
        let _ = writeln!(
            g,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="2"/><text x="{:.1}" y="{:.1}" font-size="10">{}</text>"#,
            right + 8.0,
            right + 24.0,
            color(k),
            right + 28.0,
            ly + 3.0,
            esc(&s.label)
        );
    }
    g
}

/// Final amplitudes as points on the unit disc: radius |A|, angle arg A.
pub fn phase_wheel(frame: Frame, title: &str, amps: &[(String, f64, f64)]) -> String {
    let r = 0.5 * frame.w.min(frame.h - 40.0) - 10.0;
    let (cx, cy) = (frame.x + frame.w / 2.0, frame.y + 30.0 + r);
    let rmax = amps.iter().map(|a| a.1).fold(0.0, f64::max).max(1e-12);
    let mut g = String::new();
    let _ = writeln!(
        g,
        r#"<text x="{cx:.1}" y="{:.1}" font-size="14" text-anchor="middle">{}</text>"#,
        frame.y + 16.0,
        esc(title)
    );
    let _ = writeln!(g, r##"<circle cx="{cx:.1}" cy="{cy:.1}" r="{r:.1}" fill="none" stroke="#999"/>"##);
    let _ = writeln!(
        g,
        r##"<line x1="{:.1}" y1="{cy:.1}" x2="{:.1}" y2="{cy:.1}" stroke="#ccc"/><line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="#ccc"/>"##,
        cx - r,
        cx + r,
        cy - r,
        cy + r
    );
    for (k, (label, mag, phase)) in amps.iter().enumerate() {
        let rr = r * mag / rmax;
        let (px, py) = (cx + rr * phase.cos(), cy - rr * phase.sin());
        let _ = writeln!(
            g,
            r#"<line x1="{cx:.1}" y1="{cy:.1}" x2="{px:.1}" y2="{py:.1}" stroke="{}"/><circle cx="{px:.1}" cy="{py:.1}" r="3" fill="{}"/><text x="{:.1}" y="{:.1}" font-size="10">{}</text>"#,
            color(k),
            color(k),
            px + 4.0,
            py - 4.0,
            esc(label)
        );
    }
    let _ = writeln!(
        g,
        r#"<text x="{cx:.1}" y="{:.1}" font-size="10" text-anchor="middle">radius = |A| (max {:.3}), angle = arg A</text>"#,
        cy + r + 16.0,
        rmax,
    );
    g
}

pub fn document(width: f64, height: f64, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panel_contains_one_polyline_per_series() {
        let s = vec![
            Series::new("a", vec![(0.0, 0.0), (1.0, 1.0)]),
            Series::new("b<c", vec![(0.0, 1.0), (1.0, 0.0)]),
        ];
        let svg = document(400.0, 300.0, &line_panel(Frame { x: 0.0, y: 0.0, w: 400.0, h: 300.0 }, "t", "x", "y", &s));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("b&lt;c"));
        assert!(svg.starts_with("<svg"));
    }

    #[test]
    fn flat_and_empty_series_still_render() {
        let s = vec![Series::new("flat", vec![(0.0, 2.0), (1.0, 2.0)]), Series::new("none", vec![])];
        let g = line_panel(Frame { x: 0.0, y: 0.0, w: 300.0, h: 200.0 }, "", "", "", &s);
        assert!(!g.contains("NaN"));
    }

    #[test]
    fn ticks() {
        assert_eq!(tick(0.5), "0.5");
        assert_eq!(tick(200.0), "200");
        assert_eq!(tick(1e-5), "1.0e-5");
    }
}
