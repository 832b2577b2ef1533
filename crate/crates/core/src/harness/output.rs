//! `study.csv` and `study.svg` emission.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{ConvergenceTable, StudyAxis};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str =
    "scenario,level,h,tau,N,err_l2_bulk,err_l2_surf,err_h1_bulk,err_h1_surf,eoc_l2,energy_drift,wall_seconds";

/// One line of `study.csv`. Floats are written in shortest round-trip form,
/// so parsing a written file reproduces the values bitwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub scenario: String,
    pub level: usize,
    pub h: f64,
    pub tau: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub err_l2_bulk: f64,
    pub err_l2_surf: f64,
    pub err_h1_bulk: f64,
    pub err_h1_surf: f64,
    /// Rate against the previous row; NaN on the first row or when undefined.
    pub eoc_l2: f64,
    pub energy_drift: f64,
    pub wall_seconds: f64,
}

pub fn csv_rows(table: &ConvergenceTable) -> Vec<CsvRow> {
    let eoc = table.eoc_l2();
    table
        .rows()
        .iter()
        .enumerate()
        .map(|(i, r)| CsvRow {
            scenario: r.scenario.clone(),
            level: r.level,
            h: r.h,
            tau: r.tau,
            n: r.n_dofs,
            err_l2_bulk: r.report.l2_bulk,
            err_l2_surf: r.report.l2_surf,
            err_h1_bulk: r.report.h1_bulk,
            err_h1_surf: r.report.h1_surf,
            eoc_l2: if i == 0 { f64::NAN } else { eoc[i - 1] },
            energy_drift: r.energy_drift,
            wall_seconds: r.wall_seconds,
        })
        .collect()
}

pub fn write_csv<W: Write>(w: W, rows: &[CsvRow]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(true).from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    if rows.is_empty() {
        out.write_record(CSV_HEADER.split(','))?;
    }
    out.flush().map_err(|e| Error::io("study.csv", e))?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<CsvRow>> {
    let mut reader = csv::Reader::from_reader(r);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Parse {
            what: "study csv",
            detail: format!("unexpected header {}", header.join(",")),
        });
    }
    reader
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

const NORMS: [(&str, &str); 4] = [
    ("err_l2_bulk", "#1f77b4"),
    ("err_l2_surf", "#ff7f0e"),
    ("err_h1_bulk", "#2ca02c"),
    ("err_h1_surf", "#d62728"),
];

fn norm_value(row: &CsvRow, name: &str) -> f64 {
    match name {
        "err_l2_bulk" => row.err_l2_bulk,
        "err_l2_surf" => row.err_l2_surf,
        "err_h1_bulk" => row.err_h1_bulk,
        _ => row.err_h1_surf,
    }
}

/// Log-log plot of every error column against `h` (or `τ`), with reference
/// slopes 1, 1.5 and 2.
pub fn render_svg(rows: &[CsvRow], axis: StudyAxis) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const PAD: f64 = 60.0;
    let x_of = |r: &CsvRow| match axis {
        StudyAxis::Space => r.h,
        StudyAxis::Time => r.tau,
    };
    let xs: Vec<f64> = rows.iter().map(x_of).filter(|x| *x > 0.0).collect();
    let ys: Vec<f64> = rows
        .iter()
        .flat_map(|r| NORMS.iter().map(move |(n, _)| norm_value(r, n)))
        .filter(|y| *y > 0.0 && y.is_finite())
        .collect();
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min).log10();
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max).log10();
        if lo.is_finite() && hi.is_finite() && hi > lo {
            (lo - 0.1, hi + 0.1)
        } else if lo.is_finite() {
            (lo - 1.0, lo + 1.0)
        } else {
            (-1.0, 0.0)
        }
    };
    let (x0, x1) = range(&xs);
    let (y0, y1) = range(&ys);
    let px = |x: f64| PAD + (x.log10() - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - (y.log10() - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let xlabel = match axis {
        StudyAxis::Space => "h",
        StudyAxis::Time => "tau",
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{xlabel} (log)</text>"#,
        W / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{}" font-size="14" transform="rotate(-90 15 {})" text-anchor="middle">error (log)</text>"#,
        H / 2.0,
        H / 2.0
    );

    for (k, (name, color)) in NORMS.iter().enumerate() {
        let pts: Vec<String> = rows
            .iter()
            .filter(|r| x_of(r) > 0.0 && norm_value(r, name) > 0.0 && norm_value(r, name).is_finite())
            .map(|r| format!("{:.2},{:.2}", px(x_of(r)), py(norm_value(r, name))))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="norm" data-norm="{name}" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="12" fill="{color}">{name}</text>"#,
            W - PAD - 110.0,
            PAD + 18.0 * (k as f64 + 1.0)
        );
    }

    // Guides anchored at the finest point of the first norm with data.
    let anchor = rows
        .last()
        .and_then(|r| NORMS.iter().map(|(n, _)| norm_value(r, n)).find(|v| *v > 0.0).map(|y| (x_of(r), y)));
    let xmax = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for (order, dash) in [(1.0, "2,4"), (1.5, "6,4"), (2.0, "10,4")] {
        let (ax, ay) = match anchor {
            Some((ax, ay)) if ax > 0.0 && xmax > ax => (ax, ay),
            _ => (10f64.powf(x0 + 0.1), 10f64.powf(y0 + 0.1)),
        };
        let bx = if xmax > ax { xmax } else { 10f64.powf(x1 - 0.1) };
        let by = ay * (bx / ax).powf(order);
        let _ = writeln!(
            svg,
            r#"<line class="guide" data-order="{order}" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="{dash}"/>"#,
            px(ax),
            py(ay),
            px(bx),
            py(by)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" fill="gray">O({xlabel}^{order})</text>"#,
            px(bx) + 4.0,
            py(by)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes `study.csv` and `study.svg` into `dir` and returns their paths.
pub fn emit_outputs(table: &ConvergenceTable, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rows = csv_rows(table);
    let csv_path = dir.join("study.csv");
    let mut buf = Vec::new();
    write_csv(&mut buf, &rows)?;
    fs::write(&csv_path, buf).map_err(|e| Error::io(&csv_path, e))?;
    let svg_path = dir.join("study.svg");
    fs::write(&svg_path, render_svg(&rows, table.axis)).map_err(|e| Error::io(&svg_path, e))?;
    Ok((csv_path, svg_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{ConvergenceRow, ErrorMetric, ErrorReport};

    fn table() -> ConvergenceTable {
        let mut t = ConvergenceTable::new(StudyAxis::Space);
        for (i, h) in [0.5, 0.25, 0.125].into_iter().enumerate() {
            t.push(ConvergenceRow {
                scenario: "pure".into(),
                level: i + 1,
                h,
                tau: 0.1 / 3.0 / (i + 1) as f64,
                n_dofs: 19 * (i + 1),
                report: ErrorReport {
                    l2_bulk: 0.1 * h * h,
                    l2_surf: 0.3 * h * h + 1e-17,
                    h1_bulk: h / 7.0,
                    h1_surf: 0.0,
                    metric: ErrorMetric::NodalDiscrete,
                    level: i + 1,
                    t: 1.0,
                    surface_weight: 1.0,
                },
                energy_drift: if i == 1 { f64::NAN } else { 1e-13 / 3.0 },
                wall_seconds: 0.0,
            })
            .unwrap();
        }
        t
    }

    #[test]
    fn csv_header_and_rows() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &csv_rows(&table())).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[1].contains(",NaN,"));
    }

    #[test]
    fn csv_round_trip_is_bitwise() {
        let rows = csv_rows(&table());
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            for (x, y) in [
                (a.h, b.h),
                (a.tau, b.tau),
                (a.err_l2_bulk, b.err_l2_bulk),
                (a.err_l2_surf, b.err_l2_surf),
                (a.err_h1_bulk, b.err_h1_bulk),
                (a.err_h1_surf, b.err_h1_surf),
                (a.eoc_l2, b.eoc_l2),
                (a.energy_drift, b.energy_drift),
                (a.wall_seconds, b.wall_seconds),
            ] {
                assert_eq!(x.to_bits(), y.to_bits());
            }
            assert_eq!((&a.scenario, a.level, a.n), (&b.scenario, b.level, b.n));
        }
    }

    #[test]
    fn svg_structure() {
        let svg = render_svg(&csv_rows(&table()), StudyAxis::Space);
        assert_eq!(svg.matches("<polyline class=\"norm\"").count(), 4);
        assert_eq!(svg.matches("<line class=\"guide\"").count(), 3);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
}
