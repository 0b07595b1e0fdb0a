//! Plain-text SVG and CSV export of 2-D trajectories.

use std::fmt::Write as _;
use std::io::Write;

use super::report::Trajectory;
use crate::error::Result;

const SIZE: f64 = 600.0;
const MARGIN: f64 = 40.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

fn bounds(trajectories: &[Trajectory]) -> (f64, f64, f64, f64) {
    let pts = trajectories.iter().flat_map(|t| t.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    if !x0.is_finite() {
        return (-1.0, 1.0, -1.0, 1.0);
    }
    let pad = |a: f64, b: f64| if b - a < 1e-12 { (a - 1.0, b + 1.0) } else { (a, b) };
    let (x0, x1) = pad(x0, x1);
    let (y0, y1) = pad(y0, y1);
    (x0, x1, y0, y1)
}

fn star(cx: f64, cy: f64, r: f64) -> String {
    (0..10)
        .map(|i| {
            let radius = if i % 2 == 0 { r } else { 0.4 * r };
            let a = std::f64::consts::PI * (i as f64 / 5.0 - 0.5);
            format!("{:.2},{:.2}", cx + radius * a.cos(), cy + radius * a.sin())
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// One polyline per trajectory (colored by label) and a star on every
/// single-point trajectory, which marks an initial pose.
pub fn render_svg(trajectories: &[Trajectory]) -> String {
    let (x0, x1, y0, y1) = bounds(trajectories);
    let span = SIZE - 2.0 * MARGIN;
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * span;
    let sy = |y: f64| SIZE - MARGIN - (y - y0) / (y1 - y0) * span;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">"
    );
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    for t in trajectories {
        let color = PALETTE[t.label % PALETTE.len()];
        if t.points.len() == 1 {
            let p = t.points[0];
            let _ = writeln!(
                out,
                "<polygon class=\"{}\" points=\"{}\" fill=\"gold\" stroke=\"black\"/>",
                t.name,
                star(sx(p[0]), sy(p[1]), 10.0)
            );
            continue;
        }
        let pts: Vec<String> = t.points.iter().map(|p| format!("{:.2},{:.2}", sx(p[0]), sy(p[1]))).collect();
        let _ = writeln!(
            out,
            "<polyline class=\"{}\" points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            t.name,
            pts.join(" ")
        );
        let start = t.points[0];
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>",
            sx(start[0]),
            sy(start[1])
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Rows `name,label,index,x,y`.
pub fn write_csv<W: Write>(trajectories: &[Trajectory], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["name", "label", "index", "x", "y"])?;
    for t in trajectories {
        for (i, p) in t.points.iter().enumerate() {
            w.write_record([
                t.name.clone(),
                t.label.to_string(),
                i.to_string(),
                p[0].to_string(),
                p[1].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<Trajectory> {
        vec![
            Trajectory {
                name: "initial".into(),
                label: 0,
                points: vec![[0.0, 0.0]],
            },
            Trajectory {
                name: "generated0".into(),
                label: 1,
                points: vec![[0.0, 0.0], [1.0, 2.0], [2.0, 1.0]],
            },
        ]
    }

    #[test]
    fn svg_has_star_and_polyline() {
        let svg = render_svg(&sample());
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("<polygon class=\"initial\"").count(), 1);
        assert_eq!(render_svg(&sample()), svg);
        assert!(render_svg(&[]).contains("</svg>"));
    }

    #[test]
    fn csv_rows() {
        let mut buf = Vec::new();
        write_csv(&sample(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "name,label,index,x,y");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[3], "generated0,1,1,1,2");
    }
}
