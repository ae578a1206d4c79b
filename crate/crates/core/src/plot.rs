//! Minimal static SVG charts: drift scatter plots and time-series overlays.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>) -> Self {
        let (lo, hi) = values
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            return Axis { lo: 0.0, hi: 1.0 };
        }
        let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
        Axis {
            lo: lo - pad,
            hi: hi + pad,
        }
    }

    fn union(self, other: Axis) -> Axis {
        Axis {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    fn map(&self, v: f64, from: f64, to: f64) -> f64 {
        from + (v - self.lo) / (self.hi - self.lo) * (to - from)
    }
}

struct Frame {
    x: Axis,
    y: Axis,
}

impl Frame {
    fn px(&self, v: f64) -> f64 {
        self.x.map(v, MARGIN, WIDTH - MARGIN / 2.0)
    }

    fn py(&self, v: f64) -> f64 {
        self.y.map(v, HEIGHT - MARGIN, MARGIN / 2.0)
    }

    fn open(&self, out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
        write!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        )
        .unwrap();
        write!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
        let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN / 2.0, HEIGHT - MARGIN, MARGIN / 2.0);
        write!(
            out,
            r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            x1 - x0,
            y0 - y1
        )
        .unwrap();
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let xv = self.x.lo + f * (self.x.hi - self.x.lo);
            let yv = self.y.lo + f * (self.y.hi - self.y.lo);
            let (tx, ty) = (self.px(xv), self.py(yv));
            write!(
                out,
                r#"<line x1="{tx:.1}" y1="{y0}" x2="{tx:.1}" y2="{}" stroke="black"/>"#,
                y0 + 4.0
            )
            .unwrap();
            write!(
                out,
                r#"<text x="{tx:.1}" y="{}" text-anchor="middle">{}</text>"#,
                y0 + 18.0,
                tick(xv)
            )
            .unwrap();
            write!(
                out,
                r#"<line x1="{}" y1="{ty:.1}" x2="{x0}" y2="{ty:.1}" stroke="black"/>"#,
                x0 - 4.0
            )
            .unwrap();
            write!(
                out,
                r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
                x0 - 6.0,
                ty + 4.0,
                tick(yv)
            )
            .unwrap();
        }
        write!(
            out,
            r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(title)
        )
        .unwrap();
        write!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            HEIGHT - 12.0,
            escape(xlabel)
        )
        .unwrap();
        write!(
            out,
            r#"<text x="14" y="{0}" text-anchor="middle" transform="rotate(-90 14 {0})">{1}</text>"#,
            (y0 + y1) / 2.0,
            escape(ylabel)
        )
        .unwrap();
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Scatter of `(x, y)` pairs with the `y = x` diagonal, on a shared range.
pub fn scatter_svg(points: &[(f64, f64)], title: &str, xlabel: &str, ylabel: &str) -> String {
    let axis = Axis::fit(points.iter().map(|p| p.0)).union(Axis::fit(points.iter().map(|p| p.1)));
    let frame = Frame { x: axis, y: axis };
    let mut out = String::with_capacity(64 * points.len() + 2048);
    frame.open(&mut out, title, xlabel, ylabel);
    write!(
        out,
        r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#888" stroke-dasharray="4 3"/>"##,
        frame.px(axis.lo),
        frame.py(axis.lo),
        frame.px(axis.hi),
        frame.py(axis.hi)
    )
    .unwrap();
    write!(out, r#"<g fill="{}" fill-opacity="0.35">"#, PALETTE[0]).unwrap();
    for &(x, y) in points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
        write!(
            out,
            r#"<circle cx="{:.1}" cy="{:.1}" r="1.5"/>"#,
            frame.px(x),
            frame.py(y)
        )
        .unwrap();
    }
    out.push_str("</g></svg>\n");
    out
}

/// Line chart of several series sharing an x axis starting at `x0`.
pub fn series_svg(series: &[(&str, &[f64])], x0: usize, title: &str, xlabel: &str, ylabel: &str) -> String {
    let len = series.iter().map(|(_, s)| s.len()).max().unwrap_or(0);
    let frame = Frame {
        x: Axis {
            lo: x0 as f64,
            hi: (x0 + len.max(2) - 1) as f64,
        },
        y: Axis::fit(series.iter().flat_map(|(_, s)| s.iter().copied())),
    };
    let mut out = String::with_capacity(24 * len * series.len() + 2048);
    frame.open(&mut out, title, xlabel, ylabel);
    for (k, (name, values)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        write!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1" points=""#
        )
        .unwrap();
        for (t, v) in values.iter().enumerate().filter(|(_, v)| v.is_finite()) {
            write!(out, "{:.1},{:.1} ", frame.px((x0 + t) as f64), frame.py(*v)).unwrap();
        }
        out.push_str(r#""/>"#);
        let ly = MARGIN / 2.0 + 16.0 * (k as f64 + 1.0);
        write!(
            out,
            r#"<line x1="{0}" y1="{ly}" x2="{1}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{2}" y="{3}">{4}</text>"#,
            MARGIN + 10.0,
            MARGIN + 30.0,
            MARGIN + 35.0,
            ly + 4.0,
            escape(name)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}
