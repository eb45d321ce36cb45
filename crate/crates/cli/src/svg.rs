//! Step plot of piecewise-constant intensities with dashed Wald bands.

use std::fmt::Write;

use ehe_core::ParamEstimate;

pub struct Series<'a> {
    pub name: &'a str,
    pub color: &'a str,
    pub cells: Vec<&'a ParamEstimate>,
}

const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
/// Ages on the axis are calendar ages.
const AGE_OFFSET: f64 = 50.0;

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 2.5, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|&s| s >= raw)
        .unwrap_or(10.0 * mag)
}

/// Renders `series` over `]x0, x1]` (years since 50). Cells without an
/// estimate are left as gaps.
pub fn step_plot(series: &[Series], x0: f64, x1: f64, level: f64, z: f64) -> String {
    let bands = |c: &ParamEstimate| c.estimate.zip(c.se).map(|(e, s)| (e, (e - z * s).max(0.0), e + z * s));
    let y_max = series
        .iter()
        .flat_map(|s| s.cells.iter().filter_map(|c| bands(c)).map(|b| b.2))
        .fold(0.0, f64::max)
        .max(1e-6)
        * 1.05;
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
    let py = |y: f64| H - BOTTOM - y / y_max * (H - TOP - BOTTOM);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    // axes
    let _ = writeln!(
        out,
        r#"<path d="M{l},{t} V{b} H{r}" stroke="black" fill="none"/>"#,
        l = LEFT,
        t = TOP,
        b = H - BOTTOM,
        r = W - RIGHT
    );
    let xs = nice_step(x1 - x0).max(1.0);
    let mut x = (x0 / xs).ceil() * xs;
    while x <= x1 + 1e-9 {
        let _ = writeln!(
            out,
            r#"<line x1="{p:.2}" y1="{b}" x2="{p:.2}" y2="{b2}" stroke="black"/><text x="{p:.2}" y="{ty}" text-anchor="middle">{a}</text>"#,
            p = px(x),
            b = H - BOTTOM,
            b2 = H - BOTTOM + 5.0,
            ty = H - BOTTOM + 18.0,
            a = x + AGE_OFFSET
        );
        x += xs;
    }
    let ys = nice_step(y_max);
    let mut y = 0.0;
    while y <= y_max + 1e-12 {
        let _ = writeln!(
            out,
            r#"<line x1="{l2}" y1="{p:.2}" x2="{l}" y2="{p:.2}" stroke="black"/><text x="{tx}" y="{ty:.2}" text-anchor="end">{y}</text>"#,
            l = LEFT,
            l2 = LEFT - 5.0,
            p = py(y),
            tx = LEFT - 8.0,
            ty = py(y) + 4.0,
            y = format_tick(y, ys)
        );
        y += ys;
    }
    let _ = writeln!(
        out,
        r#"<text x="{cx}" y="{by}" text-anchor="middle">age (years)</text>"#,
        cx = (LEFT + W - RIGHT) / 2.0,
        by = H - 10.0
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate(16,{cy}) rotate(-90)" text-anchor="middle">intensity (per year)</text>"#,
        cy = (TOP + H - BOTTOM) / 2.0
    );

    for (k, s) in series.iter().enumerate() {
        let mut est = String::new();
        let mut lo = String::new();
        let mut hi = String::new();
        let mut prev_end: Option<f64> = None;
        for c in &s.cells {
            let Some((e, l, h)) = bands(c) else {
                prev_end = None;
                continue;
            };
            let (a, b) = c.interval;
            for (path, v) in [(&mut est, e), (&mut lo, l), (&mut hi, h)] {
                let cmd = if prev_end == Some(a) { 'V' } else { 'M' };
                if cmd == 'M' {
                    let _ = write!(path, "M{:.2},{:.2} ", px(a), py(v));
                } else {
                    let _ = write!(path, "V{:.2} ", py(v));
                }
                let _ = write!(path, "H{:.2} ", px(b));
            }
            prev_end = Some(b);
        }
        let _ = writeln!(
            out,
            r#"<path d="{}" stroke="{c}" stroke-width="2" fill="none"/>"#,
            est.trim_end(),
            c = s.color
        );
        for band in [lo, hi] {
            let _ = writeln!(
                out,
                r#"<path d="{}" stroke="{c}" stroke-dasharray="5,4" fill="none"/>"#,
                band.trim_end(),
                c = s.color
            );
        }
        let ly = TOP + 8.0 + 18.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{x}" y1="{ly}" x2="{x2}" y2="{ly}" stroke="{c}" stroke-width="2"/><text x="{tx}" y="{ty}">{n}</text>"#,
            x = LEFT + 15.0,
            x2 = LEFT + 40.0,
            tx = LEFT + 46.0,
            ty = ly + 4.0,
            c = s.color,
            n = s.name
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{x}" y="{y}" fill="gray">dashed: {pct}% Wald interval</text>"#,
        x = LEFT + 15.0,
        y = TOP + 8.0 + 18.0 * series.len() as f64 + 4.0,
        pct = level * 100.0
    );
    out.push_str("</svg>\n");
    out
}

fn format_tick(y: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize + 1;
    format!("{y:.decimals$}")
}
