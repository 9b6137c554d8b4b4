use std::fmt::Write as _;
use std::io::Write;

use serde_json::{json, Value};

use crate::error::Result;

use super::config::{ExperimentConfig, Metric};
use super::fit::fit_slope;
use super::sweep::{ConvergenceRecord, SweepOutcome};

pub const CSV_HEADER: [&str; 7] = ["n", "trace", "hs", "relent", "J", "tail", "ms"];

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Rows in ascending `n`; unselected metrics are empty cells.
pub fn write_csv<W: Write>(records: &[ConvergenceRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    let mut rows: Vec<&ConvergenceRecord> = records.iter().collect();
    rows.sort_by_key(|r| r.n);
    for r in rows {
        w.write_record([
            r.n.to_string(),
            cell(r.trace),
            cell(r.hs),
            cell(r.relent),
            cell(r.j),
            r.tail.to_string(),
            r.ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(records: &[ConvergenceRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(records, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"];

/// Log-log plot of the positive metric values against `n`, with dashed guides of
/// slope −½ and −1 through the first plotted point.
pub fn render_svg(records: &[ConvergenceRecord], metrics: &[Metric]) -> String {
    let series: Vec<(Metric, Vec<(f64, f64)>)> = metrics
        .iter()
        .map(|&m| {
            let pts = records
                .iter()
                .filter_map(|r| r.metric(m).filter(|v| *v > 0.0 && v.is_finite()).map(|v| ((r.n as f64).log10(), v.log10())))
                .collect();
            (m, pts)
        })
        .filter(|(_, p): &(Metric, Vec<(f64, f64)>)| !p.is_empty())
        .collect();

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if series.is_empty() {
        let _ = writeln!(svg, r#"<text x="{MARGIN}" y="{MARGIN}">no positive values to plot</text>"#);
        svg.push_str("</svg>\n");
        return svg;
    }

    let all = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    x0 = x0.floor();
    x1 = x1.ceil().max(x0 + 1.0);
    y0 = y0.floor();
    y1 = y1.ceil().max(y0 + 1.0);
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    for d in (x0 as i32)..=(x1 as i32) {
        let x = px(d as f64);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">1e{d}</text>"##,
            MARGIN,
            HEIGHT - MARGIN,
            HEIGHT - MARGIN + 18.0
        );
    }
    for d in (y0 as i32)..=(y1 as i32) {
        let y = py(d as f64);
        let _ = writeln!(
            svg,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">1e{d}</text>"##,
            MARGIN,
            WIDTH - MARGIN,
            MARGIN - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">n</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0
    );

    let (ax, ay) = series[0].1[0];
    for (slope, label) in [(-0.5, "slope -1/2"), (-1.0, "slope -1")] {
        let (bx, by) = (x1, ay + slope * (x1 - ax));
        let _ = writeln!(
            svg,
            r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#888" stroke-dasharray="6,4"/><text x="{:.1}" y="{:.1}" fill="#888">{label}</text>"##,
            px(ax),
            py(ay),
            px(bx),
            py(by),
            px(bx) - 70.0,
            py(by) - 6.0
        );
    }

    for (k, (m, pts)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        );
        for &(x, y) in pts {
            let _ = writeln!(svg, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#, px(x), py(y));
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" fill="{color}">{}</text>"#,
            WIDTH - MARGIN + 6.0,
            MARGIN + 16.0 * (k as f64 + 1.0),
            m.name()
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Configuration, rows, fitted slopes and abort status as one JSON document.
pub fn sweep_report(config: &ExperimentConfig, outcome: &SweepOutcome) -> Result<Value> {
    let mut fits = serde_json::Map::new();
    for &m in &config.metrics {
        let v = match fit_slope(&outcome.records, m) {
            Ok(f) => serde_json::to_value(f)?,
            Err(e) => json!({ "error": e.to_string() }),
        };
        fits.insert(m.name().to_string(), v);
    }
    let reference: Value = serde_json::from_str(&outcome.reference.to_json()?)?;
    Ok(json!({
        "config": config,
        "reference": reference,
        "records": outcome.records,
        "fits": fits,
        "aborted": outcome.aborted,
    }))
}

/// Writes every output path set in the config.
pub fn write_outputs(config: &ExperimentConfig, outcome: &SweepOutcome) -> Result<()> {
    let o = &config.outputs;
    for p in [&o.csv, &o.svg, &o.json].into_iter().flatten() {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
    }
    if let Some(p) = &o.csv {
        write_csv(&outcome.records, std::fs::File::create(p)?)?;
    }
    if let Some(p) = &o.svg {
        let plotted: Vec<Metric> = config.metrics.iter().copied().filter(|m| *m != Metric::Lambda).collect();
        std::fs::write(p, render_svg(&outcome.records, &plotted))?;
    }
    if let Some(p) = &o.json {
        std::fs::write(p, serde_json::to_string_pretty(&sweep_report(config, outcome)?)?)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<ConvergenceRecord> {
        [8usize, 4, 16]
            .iter()
            .map(|&n| ConvergenceRecord {
                n,
                trace: Some(1.0 / (n as f64).sqrt()),
                hs: None,
                relent: Some(1.0 / n as f64),
                j: Some(0.0),
                lambda: None,
                tail: 0.0,
                ms: 0.0,
            })
            .collect()
    }

    #[test]
    fn csv_header_and_order() {
        let s = csv_string(&rows()).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "n,trace,hs,relent,J,tail,ms");
        assert!(lines[1].starts_with("4,0.5,,0.25,0,0,0"));
        assert!(lines[3].starts_with("16,"));
    }

    #[test]
    fn svg_has_reference_lines() {
        let s = render_svg(&rows(), &[Metric::Trace, Metric::Relent, Metric::J]);
        assert!(s.starts_with("<svg"));
        assert!(s.contains("slope -1/2") && s.contains("slope -1<"));
        assert_eq!(s.matches("<polyline").count(), 2);
    }
}
