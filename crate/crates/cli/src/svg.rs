//! Standalone SVG charts rendered from CSV artifacts.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::artifacts::Table;
use crate::{CliError, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    Wave,
    Wall,
    Field,
    Offsets,
    Phase,
}

impl FromStr for PlotKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "wave" => PlotKind::Wave,
            "wall" => PlotKind::Wall,
            "field" => PlotKind::Field,
            "offsets" => PlotKind::Offsets,
            "phase" => PlotKind::Phase,
            other => {
                return Err(CliError::Config(format!(
                    "unknown plot kind {other:?} (wave, wall, field, offsets, phase)"
                )))
            }
        })
    }
}

/// Linear map from data bounds onto the plotting area.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit(xs: &[f64], ys: &[f64]) -> Self {
        let span = |v: &[f64]| {
            let lo = v
                .iter()
                .copied()
                .filter(|x| x.is_finite())
                .fold(f64::INFINITY, f64::min);
            let hi = v
                .iter()
                .copied()
                .filter(|x| x.is_finite())
                .fold(f64::NEG_INFINITY, f64::max);
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 * lo.abs().max(1.0) {
                (lo - 1.0, hi + 1.0)
            } else {
                (lo, hi)
            }
        };
        Self {
            x: span(xs),
            y: span(ys),
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn open(title: &str, frame: &Frame, x_label: &str, y_label: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#,
        WIDTH / 2.0
    );
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
    let _ = writeln!(
        s,
        r#"<path class="axes" d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" stroke="black" fill="none"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{x_label} [{:.4}, {:.4}]</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0,
        frame.x.0,
        frame.x.1
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" font-size="12" transform="rotate(-90 15 {})" text-anchor="middle">{y_label} [{:.4}, {:.4}]</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        frame.y.0,
        frame.y.1
    );
    s
}

fn polyline(s: &mut String, frame: &Frame, xs: &[f64], ys: &[f64], color: &str) {
    let points: Vec<String> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|(&x, &y)| format!("{:.3},{:.3}", frame.px(x), frame.py(y)))
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
        points.join(" ")
    );
}

fn need(table: &Table, name: &str, path: &Path) -> Result<Vec<f64>> {
    table.column(name).ok_or_else(|| CliError::Artifact {
        path: path.display().to_string(),
        detail: format!("missing column {name}"),
    })
}

fn line_chart(title: &str, x_label: &str, y_label: &str, xs: &[f64], ys: &[f64]) -> String {
    let frame = Frame::fit(xs, ys);
    let mut s = open(title, &frame, x_label, y_label);
    polyline(&mut s, &frame, xs, ys, "steelblue");
    s.push_str("</svg>\n");
    s
}

/// Blue-to-red ramp on `[0, 1]`.
fn heat(v: f64) -> String {
    let t = v.clamp(0.0, 1.0);
    let r = (255.0 * t).round() as u8;
    let b = (255.0 * (1.0 - t)).round() as u8;
    format!("#{r:02x}30{b:02x}")
}

fn field_map(xs: &[f64], rho: &[f64], u: &[f64]) -> String {
    let frame = Frame::fit(xs, rho);
    let mut s = open("u(x1, rho)", &frame, "x1", "rho");
    // at most about 200 x 60 cells
    let n = xs.len();
    let stride = (n / 12_000).max(1);
    let cell_w = ((WIDTH - 2.0 * MARGIN) / 200.0).max(1.0);
    let cell_h = ((HEIGHT - 2.0 * MARGIN) / 60.0).max(1.0);
    for k in (0..n).step_by(stride) {
        if !(xs[k].is_finite() && rho[k].is_finite()) {
            continue;
        }
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{cell_w:.2}" height="{cell_h:.2}" fill="{}"/>"#,
            frame.px(xs[k]) - cell_w / 2.0,
            frame.py(rho[k]) - cell_h / 2.0,
            heat(u[k])
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Mean offset over the rays at each time.
fn mean_by_time(t: &[f64], offset: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut xs: Vec<f64> = Vec::new();
    let mut sums: Vec<(f64, usize)> = Vec::new();
    for (&tk, &ek) in t.iter().zip(offset) {
        if !ek.is_finite() {
            continue;
        }
        match xs.last() {
            Some(&last) if last == tk => {
                let acc = sums.last_mut().expect("parallel vectors");
                acc.0 += ek;
                acc.1 += 1;
            }
            _ => {
                xs.push(tk);
                sums.push((ek, 1));
            }
        }
    }
    let ys = sums.iter().map(|&(s, n)| s / n as f64).collect();
    (xs, ys)
}

fn phase_map(r: &[f64], alpha: &[f64], verdicts: &[String]) -> String {
    let frame = Frame::fit(alpha, r);
    let mut s = open("phase diagram", &frame, "alpha_deg", "R");
    for ((&a, &rr), v) in alpha.iter().zip(r).zip(verdicts) {
        let (fill, stroke) = match v.as_str() {
            "spreading" => ("firebrick", "firebrick"),
            "blocked" => ("navy", "navy"),
            _ => ("none", "gray"),
        };
        let _ = writeln!(
            s,
            r#"<circle class="marker {v}" cx="{:.3}" cy="{:.3}" r="5" fill="{fill}" stroke="{stroke}"/>"#,
            frame.px(a),
            frame.py(rr)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Renders the artifact at `path`; a pure function of the file contents.
pub fn render(path: &Path, kind: PlotKind) -> Result<String> {
    if kind == PlotKind::Field {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        if !header.starts_with("# schema_version") {
            return Err(CliError::Artifact {
                path: path.display().to_string(),
                detail: "not a field snapshot".into(),
            });
        }
        let field: funnel_core::Field64 = funnel_core::snapshot::read_csv(text.as_bytes())?;
        let (mut xs, mut rho) = (
            Vec::with_capacity(field.len()),
            Vec::with_capacity(field.len()),
        );
        for row in lines.skip(1) {
            let cols: Vec<f64> = row
                .split(',')
                .map(|c| c.trim().parse().unwrap_or(f64::NAN))
                .collect();
            if cols.len() == 4 {
                xs.push(cols[0]);
                rho.push(cols[2]);
            }
        }
        return Ok(field_map(&xs, &rho, &field.values));
    }
    let table = Table::read(path)?;
    Ok(match kind {
        PlotKind::Wave => line_chart(
            "phi(z)",
            "z",
            "phi",
            &need(&table, "z", path)?,
            &need(&table, "phi", path)?,
        ),
        PlotKind::Wall => line_chart(
            "h(x1)",
            "x1",
            "h",
            &need(&table, "x1", path)?,
            &need(&table, "h", path)?,
        ),
        PlotKind::Offsets => {
            let (t, e) = mean_by_time(&need(&table, "t", path)?, &need(&table, "offset", path)?);
            line_chart("level offset", "t", "offset", &t, &e)
        }
        PlotKind::Phase => {
            let verdicts = table
                .text_column("verdict")
                .ok_or_else(|| CliError::Artifact {
                    path: path.display().to_string(),
                    detail: "missing column verdict".into(),
                })?;
            phase_map(
                &need(&table, "R", path)?,
                &need(&table, "alpha_deg", path)?,
                &verdicts,
            )
        }
        PlotKind::Field => unreachable!("handled above"),
    })
}

/// Vertex coordinates of the first polyline in an SVG document.
pub fn polyline_points(svg: &str) -> Vec<(f64, f64)> {
    let Some(start) = svg.find("<polyline points=\"") else {
        return Vec::new();
    };
    let rest = &svg[start + 18..];
    let body = &rest[..rest.find('"').unwrap_or(0)];
    body.split_whitespace()
        .filter_map(|p| {
            let (x, y) = p.split_once(',')?;
            Some((x.parse().ok()?, y.parse().ok()?))
        })
        .collect()
}
