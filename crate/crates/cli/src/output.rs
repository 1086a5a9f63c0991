//! CSV and SVG artifacts. Files are written to a temporary sibling and
//! renamed into place.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use singular_core::analysis::{fmt_num, EstimateReport};
use singular_core::{GridKind, ScalarField};

pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).with_context(|| format!("cannot write {}", tmp.display()))?;
    std::fs::rename(&tmp, path)
        .with_context(|| format!("cannot move {} into place", path.display()))?;
    Ok(())
}

/// `x[,y],u` with one row per node.
pub fn solution_csv(u: &ScalarField) -> String {
    let grid = u.grid();
    let planar = grid.kind() == GridKind::Planar;
    let mut out = String::from(if planar { "x,y,u\n" } else { "x,u\n" });
    for n in 0..grid.len() {
        let [x, y] = grid.coord(n);
        if planar {
            let _ = writeln!(out, "{},{},{}", fmt_num(x), fmt_num(y), fmt_num(u.value(n)));
        } else {
            let _ = writeln!(out, "{},{}", fmt_num(x), fmt_num(u.value(n)));
        }
    }
    out
}

pub fn reports_csv(reports: &[EstimateReport]) -> String {
    let mut out = format!("{}\n", EstimateReport::CSV_HEADER);
    for r in reports {
        out.push_str(&r.csv_rows());
    }
    out
}

/// Log–log plot of the rows of a report; `None` when no row is plottable.
pub fn report_svg(report: &EstimateReport) -> Option<String> {
    let pts: Vec<(f64, f64)> = report
        .rows
        .iter()
        .filter(|r| r.parameter > 0.0 && r.value > 0.0)
        .map(|r| (r.parameter.log10(), r.value.log10()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    Some(polyline_svg(
        &report.id,
        &format!("log10 {}", report.parameter),
        "log10 value",
        &pts,
    ))
}

/// Radial profile or the middle row of a planar solution.
pub fn solution_svg(u: &ScalarField) -> String {
    let grid = u.grid();
    let pts: Vec<(f64, f64)> = match grid.kind() {
        GridKind::Radial => (0..grid.len())
            .map(|n| (grid.radius(n), u.value(n)))
            .collect(),
        GridKind::Planar => {
            let (nx, ny) = grid.shape();
            (0..nx)
                .map(|i| grid.planar_node(i, ny / 2))
                .map(|n| (grid.coord(n)[0], u.value(n)))
                .collect()
        }
    };
    polyline_svg("solution", "x", "u", &pts)
}

fn polyline_svg(title: &str, xlabel: &str, ylabel: &str, pts: &[(f64, f64)]) -> String {
    let (w, h, m) = (480.0, 360.0, 50.0);
    let (x0, x1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| {
        (a.0.min(p.0), a.1.max(p.0))
    });
    let (y0, y1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| {
        (a.0.min(p.1), a.1.max(p.1))
    });
    let sx = |x: f64| m + (x - x0) / (x1 - x0).max(1e-300) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0).max(1e-300) * (h - 2.0 * m);
    let mut path = String::new();
    for (i, &(x, y)) in pts.iter().enumerate() {
        let _ = write!(
            path,
            "{}{:.2},{:.2}",
            if i == 0 { "" } else { " " },
            sx(x),
            sy(y)
        );
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<path d="M{m},{m} L{m},{} L{},{}" fill="none" stroke="black"/>"#,
        h - m,
        w - m,
        h - m
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#,
        w / 2.0,
        h - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(ylabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="{m}" y="{}" font-size="10">{:.3}</text>"#,
        h - m + 14.0,
        x0
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{:.3}</text>"#,
        w - m,
        h - m + 14.0,
        x1
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{:.3}</text>"#,
        m - 4.0,
        h - m,
        y0
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{m}" font-size="10" text-anchor="end">{:.3}</text>"#,
        m - 4.0,
        y1
    );
    let _ = writeln!(
        out,
        r#"<polyline points="{path}" fill="none" stroke="steelblue" stroke-width="2"/>"#
    );
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// File-name friendly version of a report id.
pub fn slug(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}
