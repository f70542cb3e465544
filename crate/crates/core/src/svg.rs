//! Two-dimensional SVG plots of flowpipes, trajectories and the goal set.

use std::fmt::Write;

use crate::interval::IntervalBox;
use crate::simulate::Trajectory;

pub const WIDTH: f64 = 640.0;
pub const HEIGHT: f64 = 480.0;
pub const MARGIN: f64 = 48.0;

/// Maps data coordinates onto the canvas.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct View {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl View {
    fn fit(boxes: &[&IntervalBox], trajs: &[Trajectory], goal: Option<&IntervalBox>, dims: (usize, usize)) -> View {
        let mut x = (f64::INFINITY, f64::NEG_INFINITY);
        let mut y = (f64::INFINITY, f64::NEG_INFINITY);
        let mut take = |px: f64, py: f64| {
            if px.is_finite() {
                x = (x.0.min(px), x.1.max(px));
            }
            if py.is_finite() {
                y = (y.0.min(py), y.1.max(py));
            }
        };
        for b in boxes.iter().copied().chain(goal) {
            take(b[dims.0].lo(), b[dims.1].lo());
            take(b[dims.0].hi(), b[dims.1].hi());
        }
        for tr in trajs {
            for s in &tr.states {
                take(s[dims.0], s[dims.1]);
            }
        }
        let settle = |(lo, hi): (f64, f64)| {
            if !(lo <= hi) {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            }
        };
        View { x: settle(x), y: settle(y) }
    }

    pub fn px(&self, v: f64) -> f64 {
        MARGIN + (v - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    pub fn py(&self, v: f64) -> f64 {
        HEIGHT - MARGIN - (v - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }

    fn clamp_x(&self, v: f64) -> f64 {
        v.clamp(self.x.0, self.x.1)
    }

    fn clamp_y(&self, v: f64) -> f64 {
        v.clamp(self.y.0, self.y.1)
    }
}

/// Renders the projection onto state dimensions `dims`. Output depends only
/// on the inputs.
pub fn emit_svg(
    flowpipes: &[IntervalBox],
    trajectories: &[Trajectory],
    goal: Option<&IntervalBox>,
    dims: (usize, usize),
    labels: (&str, &str),
) -> String {
    let boxes: Vec<&IntervalBox> = flowpipes.iter().collect();
    let view = View::fit(&boxes, trajectories, goal, dims);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" style="fill:#ffffff"/>"#);

    // Axes with end labels.
    let (x0, x1) = (MARGIN, WIDTH - MARGIN);
    let (y0, y1) = (HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M {x0:.3} {y1:.3} L {x0:.3} {y0:.3} L {x1:.3} {y0:.3}" style="fill:none;stroke:#000000;stroke-width:1"/>"#
    );
    let text = |s: &mut String, x: f64, y: f64, anchor: &str, body: &str| {
        let _ = writeln!(
            s,
            r#"<text x="{x:.3}" y="{y:.3}" style="font-family:sans-serif;font-size:11px;text-anchor:{anchor}">{body}</text>"#
        );
    };
    text(&mut s, x0, y0 + 16.0, "middle", &format!("{:.4}", view.x.0));
    text(&mut s, x1, y0 + 16.0, "middle", &format!("{:.4}", view.x.1));
    text(&mut s, x0 - 4.0, y0, "end", &format!("{:.4}", view.y.0));
    text(&mut s, x0 - 4.0, y1 + 4.0, "end", &format!("{:.4}", view.y.1));
    text(&mut s, (x0 + x1) / 2.0, HEIGHT - 8.0, "middle", &escape(labels.0));
    text(&mut s, 14.0, (y0 + y1) / 2.0, "middle", &escape(labels.1));

    if let Some(g) = goal {
        let (gx, gy) = (g[dims.0], g[dims.1]);
        let (lx, hx) = (view.clamp_x(gx.lo()), view.clamp_x(gx.hi()));
        let (ly, hy) = (view.clamp_y(gy.lo()), view.clamp_y(gy.hi()));
        let _ = writeln!(
            s,
            r#"<rect class="goal" x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" style="fill:#3060e0;fill-opacity:0.2;stroke:#3060e0;stroke-width:1.5"/>"#,
            view.px(lx),
            view.py(hy),
            view.px(hx) - view.px(lx),
            view.py(ly) - view.py(hy)
        );
    }
    for b in flowpipes {
        let (bx, by) = (b[dims.0], b[dims.1]);
        let _ = writeln!(
            s,
            r#"<rect class="flowpipe" x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" style="fill:none;stroke:#20a040;stroke-width:0.8"/>"#,
            view.px(bx.lo()),
            view.py(by.hi()),
            view.px(bx.hi()) - view.px(bx.lo()),
            view.py(by.lo()) - view.py(by.hi())
        );
    }
    for tr in trajectories {
        let mut pts = String::new();
        for st in &tr.states {
            let _ = write!(pts, "{:.3},{:.3} ", view.px(st[dims.0]), view.py(st[dims.1]));
        }
        let _ = writeln!(
            s,
            r#"<polyline class="trajectory" points="{}" style="fill:none;stroke:#d02020;stroke-width:0.6"/>"#,
            pts.trim_end()
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
