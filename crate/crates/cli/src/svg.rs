//! Scatter plot of planar features with classifier directions.

use std::fmt::Write;

use grassframe::linalg::Matrix;

const SIZE: f64 = 800.0;
const MARGIN: f64 = 40.0;

pub fn class_color(class: usize, classes: usize) -> String {
    let hue = 360.0 * class as f64 / classes as f64;
    format!("hsl({hue:.1},70%,45%)")
}

/// Renders feature columns of `z` as dots colored by label and classifier
/// columns of `m` as lines from the origin. Both must be 2-dimensional.
pub fn snapshot(m: &Matrix, z: &Matrix, labels: &[usize], iter: usize) -> String {
    assert_eq!(m.rows(), 2, "snapshots are planar");
    let classes = m.cols();
    let extent = m
        .as_slice()
        .iter()
        .chain(z.as_slice())
        .fold(1e-12f64, |a, v| a.max(v.abs()))
        * 1.1;
    let scale = (SIZE / 2.0 - MARGIN) / extent;
    let px = |x: f64| SIZE / 2.0 + x * scale;
    let py = |y: f64| SIZE / 2.0 - y * scale;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="800" viewBox="0 0 800 800">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="800" height="800" style="fill:#ffffff"/>"#
    );
    let _ = writeln!(
        out,
        r#"<line x1="{c}" y1="{m}" x2="{c}" y2="{e}" style="stroke:#dddddd;stroke-width:1"/><line x1="{m}" y1="{c}" x2="{e}" y2="{c}" style="stroke:#dddddd;stroke-width:1"/>"#,
        c = SIZE / 2.0,
        m = MARGIN,
        e = SIZE - MARGIN
    );
    for y in 0..classes {
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" style="stroke:{};stroke-width:3"/>"#,
            px(0.0),
            py(0.0),
            px(m[(0, y)]),
            py(m[(1, y)]),
            class_color(y, classes)
        );
    }
    for (col, &y) in labels.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="5" style="fill:{};fill-opacity:0.8"/>"#,
            px(z[(0, col)]),
            py(z[(1, col)]),
            class_color(y, classes)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="20" y="30" style="font-family:monospace;font-size:18px;fill:#333333">iter {iter}</text>"#
    );
    out.push_str("</svg>\n");
    out
}
