//! Self-contained SVG log-log convergence charts.
//!
//! One chart shows a single error norm on two panels: against the mesh
//! size `h` and against `sqrt(DOF)`. Both axes are log10. A dashed
//! reference line with the predicted slope is anchored at the finest
//! data point; against `sqrt(DOF)` the slope flips sign because
//! `h ~ DOF^(-1/2)` on quasi-uniform 2D meshes.
//!
//! The output is plain SVG text without external fonts, scripts or
//! stylesheets, so the files render the same in any viewer.

use std::fmt::Write as _;

use crate::error::{FoslsError, Result};

const PANEL_W: f64 = 320.0;
const PANEL_H: f64 = 280.0;
const MARGIN_L: f64 = 72.0;
const MARGIN_R: f64 = 26.0;
const MARGIN_T: f64 = 50.0;
const MARGIN_B: f64 = 56.0;
const GAP: f64 = 80.0;

const DATA_COLOR: &str = "#145a96";
const REF_COLOR: &str = "#b02a2a";

/// Pixel rectangle of one panel plus the log10 ranges it displays.
struct Frame {
    px: f64,
    py: f64,
    lx0: f64,
    lx1: f64,
    ly0: f64,
    ly1: f64,
}

impl Frame {
    fn x(&self, lx: f64) -> f64 {
        self.px + (lx - self.lx0) / (self.lx1 - self.lx0) * PANEL_W
    }

    fn y(&self, ly: f64) -> f64 {
        self.py + PANEL_H - (ly - self.ly0) / (self.ly1 - self.ly0) * PANEL_H
    }
}

/// Widens `[lo, hi]` by 6% of the span on each side, at least 0.08
/// decades, so markers never sit on the frame.
fn padded(lo: f64, hi: f64) -> (f64, f64) {
    let pad = (0.06 * (hi - lo)).max(0.08);
    (lo - pad, hi + pad)
}

fn check_positive(name: &str, values: &[f64]) -> Result<()> {
    for &v in values {
        if !(v > 0.0) || !v.is_finite() {
            return Err(FoslsError::Config(format!(
                "{name} values must be positive and finite for a log plot, got {v}"
            )));
        }
    }
    Ok(())
}

/// Renders one panel: frame, decade grid, dashed reference line of slope
/// `slope` anchored at the last (finest) data point, then the data.
fn panel(
    out: &mut String,
    frame: &Frame,
    lx: &[f64],
    ly: &[f64],
    slope: f64,
    x_label: &str,
) {
    let n = lx.len();
    let (ax, ay) = (lx[n - 1], ly[n - 1]);
    let ref_y = |x: f64| ay + slope * (x - ax);
    let xmin = lx.iter().cloned().fold(f64::INFINITY, f64::min);
    let xmax = lx.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let _ = write!(out, "<g>");
    let _ = write!(
        out,
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{PANEL_W}\" height=\"{PANEL_H}\" \
         fill=\"none\" stroke=\"#444\"/>",
        frame.px, frame.py
    );

    // Decade grid lines and tick labels; endpoints label the axis when no
    // full decade falls inside the range.
    let mut x_ticks: Vec<(f64, String)> = (frame.lx0.ceil() as i64..=frame.lx1.floor() as i64)
        .map(|k| (k as f64, format!("1e{k}")))
        .collect();
    if x_ticks.is_empty() {
        x_ticks = vec![
            (xmin, format!("{:.2e}", 10f64.powf(xmin))),
            (xmax, format!("{:.2e}", 10f64.powf(xmax))),
        ];
    }
    for (t, label) in &x_ticks {
        let x = frame.x(*t);
        let _ = write!(
            out,
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#ddd\"/>",
            frame.py,
            frame.py + PANEL_H
        );
        let _ = write!(
            out,
            "<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{label}</text>",
            frame.py + PANEL_H + 18.0
        );
    }
    let mut y_ticks: Vec<(f64, String)> = (frame.ly0.ceil() as i64..=frame.ly1.floor() as i64)
        .map(|k| (k as f64, format!("1e{k}")))
        .collect();
    if y_ticks.is_empty() {
        let ymin = ly.iter().cloned().fold(f64::INFINITY, f64::min);
        let ymax = ly.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        y_ticks = vec![
            (ymin, format!("{:.2e}", 10f64.powf(ymin))),
            (ymax, format!("{:.2e}", 10f64.powf(ymax))),
        ];
    }
    for (t, label) in &y_ticks {
        let y = frame.y(*t);
        let _ = write!(
            out,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#ddd\"/>",
            frame.px,
            frame.px + PANEL_W
        );
        let _ = write!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{label}</text>",
            frame.px - 6.0,
            y + 4.0
        );
    }

    // Reference slope, drawn across the data's x extent.
    let _ = write!(
        out,
        "<line class=\"ref\" x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" \
         stroke=\"{REF_COLOR}\" stroke-width=\"1.3\" stroke-dasharray=\"6 4\"/>",
        frame.x(xmin),
        frame.y(ref_y(xmin)),
        frame.x(xmax),
        frame.y(ref_y(xmax))
    );
    let _ = write!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" fill=\"{REF_COLOR}\">slope {slope:+.2}</text>",
        frame.x(xmax) - 74.0,
        frame.y(ref_y(xmax)) - 8.0
    );

    let points: Vec<String> = lx
        .iter()
        .zip(ly)
        .map(|(&x, &y)| format!("{:.2},{:.2}", frame.x(x), frame.y(y)))
        .collect();
    let _ = write!(
        out,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{DATA_COLOR}\" stroke-width=\"1.5\"/>",
        points.join(" ")
    );
    for (&x, &y) in lx.iter().zip(ly) {
        let _ = write!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{DATA_COLOR}\"/>",
            frame.x(x),
            frame.y(y)
        );
    }

    let _ = write!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{x_label}</text>",
        frame.px + PANEL_W / 2.0,
        frame.py + PANEL_H + 40.0
    );
    let _ = write!(out, "</g>");
}

/// Builds the two-panel chart for one error norm.
///
/// `h`, `root_dof` and `err` are level-ordered (coarse to fine) and must
/// be positive; `rate` is the predicted decay order of `err` in `h`.
pub fn convergence_chart(
    title: &str,
    norm: &str,
    h: &[f64],
    root_dof: &[f64],
    err: &[f64],
    rate: f64,
) -> Result<String> {
    if h.len() != err.len() || root_dof.len() != err.len() {
        return Err(FoslsError::Config(format!(
            "chart series lengths differ: {} h, {} sqrt(DOF), {} errors",
            h.len(),
            root_dof.len(),
            err.len()
        )));
    }
    if h.len() < 2 {
        return Err(FoslsError::Config(
            "a convergence chart needs at least two levels".into(),
        ));
    }
    if !rate.is_finite() {
        return Err(FoslsError::Config(format!(
            "reference rate must be finite, got {rate}"
        )));
    }
    check_positive("h", h)?;
    check_positive("sqrt(DOF)", root_dof)?;
    check_positive(norm, err)?;

    let lh: Vec<f64> = h.iter().map(|v| v.log10()).collect();
    let ld: Vec<f64> = root_dof.iter().map(|v| v.log10()).collect();
    let le: Vec<f64> = err.iter().map(|v| v.log10()).collect();

    // y range shared by both panels; each panel includes its reference
    // line's extreme (the anchor is a data point, so only the far end of
    // the line can stick out).
    let mut ylo = f64::INFINITY;
    let mut yhi = f64::NEG_INFINITY;
    for &v in &le {
        ylo = ylo.min(v);
        yhi = yhi.max(v);
    }
    for (lx, slope) in [(&lh, rate), (&ld, -rate)] {
        let (ax, ay) = (lx[lx.len() - 1], le[le.len() - 1]);
        for &x in lx.iter() {
            let y = ay + slope * (x - ax);
            ylo = ylo.min(y);
            yhi = yhi.max(y);
        }
    }
    let (ly0, ly1) = padded(ylo, yhi);

    let range_of = |lx: &[f64]| {
        let lo = lx.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = lx.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        padded(lo, hi)
    };
    let (hx0, hx1) = range_of(&lh);
    let (dx0, dx1) = range_of(&ld);

    let width = MARGIN_L + PANEL_W + GAP + PANEL_W + MARGIN_R;
    let height = MARGIN_T + PANEL_H + MARGIN_B;

    let mut out = String::new();
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"Helvetica, Arial, sans-serif\" \
         font-size=\"12\">"
    );
    let _ = write!(out, "<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>");
    let _ = write!(
        out,
        "<text x=\"{:.2}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{title}</text>",
        width / 2.0
    );
    let _ = write!(
        out,
        "<text x=\"16\" y=\"{:.2}\" transform=\"rotate(-90 16 {0:.2})\" \
         text-anchor=\"middle\">{norm}</text>",
        MARGIN_T + PANEL_H / 2.0
    );

    let left = Frame { px: MARGIN_L, py: MARGIN_T, lx0: hx0, lx1: hx1, ly0, ly1 };
    panel(&mut out, &left, &lh, &le, rate, "h");
    let right = Frame {
        px: MARGIN_L + PANEL_W + GAP,
        py: MARGIN_T,
        lx0: dx0,
        lx1: dx1,
        ly0,
        ly1,
    };
    panel(&mut out, &right, &ld, &le, -rate, "sqrt(DOF)");

    let _ = write!(out, "</svg>");
    Ok(out)
}
