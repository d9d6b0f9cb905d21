//! Bare-bones SVG line and quiver plots.

use std::fmt::Write as _;

use polyode::ode::Trajectory;
use polyode::systems::VectorField;

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let pad = |(lo, hi): (f64, f64)| {
            if hi > lo {
                (lo, hi)
            } else {
                (lo - 1.0, hi + 1.0)
            }
        };
        Frame { x: pad(x), y: pad(y) }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * MARGIN)
    }

    fn axes(&self, s: &mut String, xlabel: &str, ylabel: &str) {
        let _ = write!(
            s,
            r##"<rect x="{m}" y="{m}" width="{w}" height="{h}" fill="none" stroke="#444"/>"##,
            m = MARGIN,
            w = W - 2.0 * MARGIN,
            h = H - 2.0 * MARGIN
        );
        let _ = write!(
            s,
            r##"<text x="{}" y="{}" font-size="11" text-anchor="start">{:.3}</text><text x="{}" y="{}" font-size="11" text-anchor="end">{:.3}</text>"##,
            MARGIN,
            H - MARGIN + 14.0,
            self.x.0,
            W - MARGIN,
            H - MARGIN + 14.0,
            self.x.1
        );
        let _ = write!(
            s,
            r##"<text x="{}" y="{}" font-size="11" text-anchor="end">{:.3}</text><text x="{}" y="{}" font-size="11" text-anchor="end">{:.3}</text>"##,
            MARGIN - 4.0,
            H - MARGIN,
            self.y.0,
            MARGIN - 4.0,
            MARGIN + 10.0,
            self.y.1
        );
        let _ = write!(
            s,
            r##"<text x="{}" y="{}" font-size="12" text-anchor="middle">{xlabel}</text><text x="14" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">{ylabel}</text>"##,
            W / 2.0,
            H - 10.0,
            H / 2.0,
            H / 2.0
        );
    }
}

fn header() -> String {
    format!(
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}"><rect width="100%" height="100%" fill="white"/>"##
    )
}

/// One polyline per state against time.
pub fn trajectory_plot(traj: &Trajectory, names: &[String]) -> String {
    let t = traj.times();
    let b = traj.bounds();
    let lo = b.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = b.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let frame = Frame::new((t[0], *t.last().unwrap()), (lo, hi));
    let mut s = header();
    frame.axes(&mut s, "t", "state");
    for j in 0..traj.dim() {
        let color = COLORS[j % COLORS.len()];
        s.push_str(r#"<polyline fill="none" stroke-width="1.5" stroke=""#);
        s.push_str(color);
        s.push_str(r#"" points=""#);
        for (i, &ti) in t.iter().enumerate() {
            let _ = write!(s, "{:.2},{:.2} ", frame.px(ti), frame.py(traj.state(i)[j]));
        }
        s.push_str(r#""/>"#);
        let name = names.get(j).map_or("", String::as_str);
        let _ = write!(
            s,
            r#"<text x="{}" y="{}" font-size="12" fill="{color}">{name}</text>"#,
            W - MARGIN + 4.0,
            MARGIN + 14.0 * (j as f64 + 1.0)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Arrows of equal length showing field direction.
pub fn quiver_plot(field: &VectorField) -> String {
    let frame = Frame::new(field.region.x, field.region.y);
    let cell = (W - 2.0 * MARGIN).min(H - 2.0 * MARGIN) / field.n as f64;
    let len = 0.4 * cell;
    let mut s = header();
    frame.axes(&mut s, "x", "y");
    for p in &field.samples {
        let (x0, y0) = (frame.px(p[0]), frame.py(p[1]));
        // Screen y grows downward.
        let (dx, dy) = (p[2], -p[3]);
        let norm = dx.hypot(dy);
        if !(norm > 0.0 && norm.is_finite()) {
            let _ = write!(s, r##"<circle cx="{x0:.2}" cy="{y0:.2}" r="1" fill="#444"/>"##);
            continue;
        }
        let (ux, uy) = (dx / norm * len, dy / norm * len);
        let _ = write!(
            s,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#1f77b4" stroke-width="1"/><circle cx="{:.2}" cy="{:.2}" r="1.2" fill="#1f77b4"/>"##,
            x0 - ux / 2.0,
            y0 - uy / 2.0,
            x0 + ux / 2.0,
            y0 + uy / 2.0,
            x0 + ux / 2.0,
            y0 + uy / 2.0
        );
    }
    s.push_str("</svg>\n");
    s
}
