//! Minimal SVG plots built from rectangles, polylines and text.

use std::fmt::Write as _;

use nvphot::sizing::{CrystalRecord, Histogram};

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 24.0;
const BOTTOM: f64 = 48.0;
const COLORS: [&str; 3] = ["#3b6ea5", "#c0504d", "#6a9f3a"];

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }
}

fn header(out: &mut String) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Axes with five ticks each; x tick labels come from `xfmt`.
fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str, xfmt: &dyn Fn(f64) -> String) {
    let (bx, by) = (f.py(f.y0), f.px(f.x0));
    let _ = writeln!(
        out,
        r#"<polyline points="{by:.1},{:.1} {by:.1},{bx:.1} {:.1},{bx:.1}" fill="none" stroke="black"/>"#,
        f.py(f.y1),
        f.px(f.x1)
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let x = f.x0 + t * (f.x1 - f.x0);
        let y = f.y0 + t * (f.y1 - f.y0);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            f.px(x),
            bx + 16.0,
            xfmt(x)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#,
            by - 6.0,
            f.py(y) + 4.0,
            y
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 8.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
}

/// Overlaid histograms, each normalised to unit total; the first as bars,
/// the others as step outlines.
pub fn histograms(series: &[(&str, &Histogram)], xlabel: &str) -> String {
    let series: Vec<_> = series.iter().filter(|(_, h)| h.total() > 0.0).collect();
    let x0 = series.iter().map(|(_, h)| h.edges[0]).fold(f64::INFINITY, f64::min);
    let x1 = series
        .iter()
        .map(|(_, h)| h.edges[h.edges.len() - 1])
        .fold(f64::NEG_INFINITY, f64::max);
    let ymax = series
        .iter()
        .flat_map(|(_, h)| h.counts.iter().map(move |c| c / h.total()))
        .fold(0.0, f64::max);
    let mut out = String::new();
    header(&mut out);
    if series.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let f = Frame {
        x0,
        x1,
        y0: 0.0,
        y1: ymax * 1.05,
    };
    for (k, (_, h)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let total = h.total();
        if k == 0 {
            for (i, c) in h.counts.iter().enumerate() {
                let (l, r) = (f.px(h.edges[i]), f.px(h.edges[i + 1]));
                let top = f.py(c / total);
                let _ = writeln!(
                    out,
                    r#"<rect x="{l:.1}" y="{top:.1}" width="{:.1}" height="{:.1}" fill="{color}" fill-opacity="0.6" stroke="{color}"/>"#,
                    r - l,
                    f.py(0.0) - top
                );
            }
        } else {
            let mut pts = format!("{:.1},{:.1}", f.px(h.edges[0]), f.py(0.0));
            for (i, c) in h.counts.iter().enumerate() {
                let y = f.py(c / total);
                let _ = write!(pts, " {:.1},{y:.1} {:.1},{y:.1}", f.px(h.edges[i]), f.px(h.edges[i + 1]));
            }
            let _ = write!(pts, " {:.1},{:.1}", f.px(h.edges[h.edges.len() - 1]), f.py(0.0));
            let _ = writeln!(
                out,
                r#"<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>"#
            );
        }
    }
    for (k, (label, _)) in series.iter().enumerate() {
        let y = TOP + 14.0 + 16.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="12" height="10" fill="{}"/><text x="{:.1}" y="{y:.1}">{}</text>"#,
            W - RIGHT - 150.0,
            y - 9.0,
            COLORS[k % COLORS.len()],
            W - RIGHT - 132.0,
            escape(label)
        );
    }
    axes(&mut out, &f, xlabel, "fraction", &|x| format!("{x:.0}"));
    out.push_str("</svg>\n");
    out
}

/// Every fitted crystal's data on the universal curve `R/R_det` against
/// `P_eff/P_s` (log axis), with `x / (1 + x)` drawn through it.
pub fn saturation(records: &[CrystalRecord]) -> String {
    let points: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| r.fit.map(|f| (r, f)))
        .flat_map(|(r, f)| {
            r.effective_points()
                .into_iter()
                .map(move |(p, y)| (p / f.p_s, y / f.r_det))
        })
        .filter(|(x, y)| *x > 0.0 && x.is_finite() && y.is_finite())
        .collect();
    let mut out = String::new();
    header(&mut out);
    if points.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.log10()).collect();
    let (xmin, xmax) = lx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (x0, x1) = (xmin.floor(), xmax.ceil().max(xmin.floor() + 1.0));
    let ymax = points.iter().map(|p| p.1).fold(1.0, f64::max);
    let f = Frame {
        x0,
        x1,
        y0: 0.0,
        y1: ymax * 1.05,
    };
    for (&x, &(_, y)) in lx.iter().zip(&points) {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.1}" cy="{:.1}" r="2" fill="{}" fill-opacity="0.5"/>"#,
            f.px(x),
            f.py(y),
            COLORS[0]
        );
    }
    let curve: Vec<String> = (0..=200)
        .map(|i| {
            let lx = x0 + (x1 - x0) * i as f64 / 200.0;
            let x = 10f64.powf(lx);
            format!("{:.1},{:.1}", f.px(lx), f.py(x / (1.0 + x)))
        })
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
        curve.join(" "),
        COLORS[1]
    );
    axes(&mut out, &f, "P_eff / P_s", "rate / R_det", &|x| format!("{:.2e}", 10f64.powf(x)));
    out.push_str("</svg>\n");
    out
}
