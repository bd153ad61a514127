use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regrets below this are drawn at this value on log axes.
pub const REGRET_FLOOR: f64 = 1e-10;

pub const CSV_HEADER: [&str; 7] = [
    "algorithm",
    "instance",
    "budget",
    "seed",
    "spent",
    "regret",
    "wall_ms",
];

/// One row of a sweep. A missing regret marks a skipped cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub algorithm: String,
    pub instance: String,
    pub budget: f64,
    pub seed: u64,
    pub spent: f64,
    pub regret: Option<f64>,
    pub wall_ms: f64,
}

impl TraceRow {
    pub fn is_skipped(&self) -> bool {
        self.regret.is_none()
    }
}

pub fn sort_rows(rows: &mut [TraceRow]) {
    rows.sort_by(|a, b| {
        a.algorithm
            .cmp(&b.algorithm)
            .then(a.instance.cmp(&b.instance))
            .then(a.budget.total_cmp(&b.budget))
            .then(a.seed.cmp(&b.seed))
    });
}

/// Appends rows to a CSV file, flushing after each so partial sweeps persist.
pub struct CsvAppender {
    writer: csv::Writer<File>,
    path: std::path::PathBuf,
}

impl CsvAppender {
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(file);
        writer
            .write_record(CSV_HEADER)
            .and_then(|()| writer.flush().map_err(csv::Error::from))
            .map_err(|e| csv_error(path, e))?;
        Ok(CsvAppender {
            writer,
            path: path.to_path_buf(),
        })
    }

    pub fn append(&mut self, row: &TraceRow) -> Result<()> {
        self.writer
            .serialize(row)
            .map_err(|e| csv_error(&self.path, e))?;
        self.writer.flush().map_err(|e| Error::io(&self.path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Writes `rows` sorted by algorithm, instance, budget and seed.
pub fn emit_csv(rows: &[TraceRow], path: &Path) -> Result<()> {
    let mut sorted = rows.to_vec();
    sort_rows(&mut sorted);
    let mut out = CsvAppender::create(path)?;
    for row in &sorted {
        out.append(row)?;
    }
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header != CSV_HEADER {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("unexpected header {header:?}"),
        });
    }
    reader
        .deserialize()
        .collect::<std::result::Result<Vec<TraceRow>, _>>()
        .map_err(|e| csv_error(path, e))
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Mean regret per budget for each algorithm, skipped rows dropped.
fn curves(rows: &[TraceRow]) -> BTreeMap<&str, Vec<(f64, f64)>> {
    let mut acc: BTreeMap<&str, BTreeMap<u64, (f64, f64, usize)>> = BTreeMap::new();
    for row in rows {
        let Some(r) = row.regret else { continue };
        let e = acc
            .entry(&row.algorithm)
            .or_default()
            .entry(row.budget.to_bits())
            .or_insert((row.budget, 0.0, 0));
        e.1 += r;
        e.2 += 1;
    }
    acc.into_iter()
        .map(|(alg, by_budget)| {
            let mut pts: Vec<(f64, f64)> = by_budget
                .into_values()
                .map(|(b, sum, n)| (b, (sum / n as f64).max(REGRET_FLOOR)))
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            (alg, pts)
        })
        .filter(|(_, pts)| !pts.is_empty())
        .collect()
}

/// Renders mean regret against budget on log-log axes.
pub fn render_svg(rows: &[TraceRow]) -> String {
    let curves = curves(rows);
    let all = curves.values().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(b, r) in all {
        x0 = x0.min(b.log10());
        x1 = x1.max(b.log10());
        y0 = y0.min(r.log10());
        y1 = y1.max(r.log10());
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, REGRET_FLOOR.log10(), 0.0);
    }
    if x1 - x0 < 1e-9 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-9 {
        y1 = y0 + 1.0;
    }
    let sx = |b: f64| MARGIN + (b.log10() - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |r: f64| HEIGHT - MARGIN - (r.log10() - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<g stroke="black" fill="none"><line x1="{m}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{m}" y1="{t}" x2="{m}" y2="{b}"/></g>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN,
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">budget (log scale)</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{}" font-size="12" transform="rotate(-90 15 {})" text-anchor="middle">simple regret (log scale, floor {REGRET_FLOOR:e})</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (i, (alg, pts)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = pts
            .iter()
            .map(|&(b, r)| format!("{:.2},{:.2}", sx(b), sy(r)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline data-algorithm="{alg}" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            coords.join(" ")
        );
        let ly = MARGIN + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<text class="legend" x="{}" y="{ly}" font-size="12" fill="{color}">{alg}</text>"#,
            WIDTH - MARGIN - 110.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn emit_svg(rows: &[TraceRow], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, render_svg(rows)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(alg: &str, budget: f64, regret: Option<f64>) -> TraceRow {
        TraceRow {
            algorithm: alg.into(),
            instance: "x".into(),
            budget,
            seed: 0,
            spent: budget / 2.0,
            regret,
            wall_ms: 1.5,
        }
    }

    #[test]
    fn floor_and_legend() {
        let rows = [
            row("a", 10.0, Some(1e-12)),
            row("a", 100.0, Some(0.5)),
            row("b", 10.0, None),
        ];
        let svg = render_svg(&rows);
        assert!(svg.contains(r#"data-algorithm="a""#));
        assert!(!svg.contains(r#"data-algorithm="b""#));
        assert_eq!(svg.matches(r#"class="legend""#).count(), 1);
        let c = curves(&rows);
        assert_eq!(c["a"][0].1, REGRET_FLOOR);
    }
}
