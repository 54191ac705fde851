use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EvalError, EvalReport, Metric, MetricRecord, SummaryStats};

/// One row of a best/worst model comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub function_id: usize,
    /// `highest` or `lowest`, referring to the DeepONet R² ranking.
    pub case: String,
    pub model: String,
    pub r2: Option<f64>,
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    pub rmse_mae_ratio: Option<f64>,
}

impl ComparisonRow {
    pub fn from_record(case: &str, model: &str, r: &MetricRecord) -> Self {
        Self {
            function_id: r.function_id,
            case: case.to_string(),
            model: model.to_string(),
            r2: r.r2,
            mse: r.mse,
            rmse: r.rmse,
            mae: r.mae,
            rmse_mae_ratio: r.rmse_mae_ratio,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Equal-width histogram over `[min, max]`; the last bin is closed.
pub fn histogram(values: &[f64], bins: usize) -> Histogram {
    let bins = bins.max(1);
    if values.is_empty() {
        return Histogram {
            edges: vec![0.0, 1.0],
            counts: vec![0],
        };
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        hi = lo + 1.0;
    }
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|k| lo + width * k as f64).collect();
    let mut counts = vec![0; bins];
    for v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    Histogram { edges, counts }
}

/// Minimal bar-chart rendering of a histogram.
pub fn svg_histogram(h: &Histogram, title: &str) -> String {
    let (w, ht, pad) = (640.0, 400.0, 50.0);
    let max_count = h.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let bar_w = (w - 2.0 * pad) / h.counts.len() as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{ht}" viewBox="0 0 {w} {ht}">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="25" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<line x1="{pad}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#,
        ht - pad,
        w - pad
    );
    for (k, &c) in h.counts.iter().enumerate() {
        let bh = (ht - 2.0 * pad) * c as f64 / max_count;
        let x = pad + bar_w * k as f64;
        let _ = writeln!(
            s,
            r##"<rect x="{x:.2}" y="{:.2}" width="{:.2}" height="{bh:.2}" fill="#4878a8" stroke="white" data-count="{c}"/>"##,
            ht - pad - bh,
            bar_w
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{pad}" y="{}" font-family="sans-serif" font-size="12">{:.4}</text>"#,
        ht - pad + 18.0,
        h.edges[0]
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end" font-family="sans-serif" font-size="12">{:.4}</text>"#,
        w - pad,
        ht - pad + 18.0,
        h.edges[h.edges.len() - 1]
    );
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportPaths {
    pub metrics_csv: PathBuf,
    pub summary_json: PathBuf,
    pub histograms: Vec<PathBuf>,
    pub comparison_csv: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct SummaryFile {
    config_hash: String,
    summary: SummaryStats,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(e: csv::Error) -> EvalError {
    EvalError::Format(e.to_string())
}

fn write_csv<T: Serialize>(path: &Path, config_hash: &str, rows: &[T]) -> Result<(), EvalError> {
    let mut buf = format!("# config_hash={config_hash}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in rows {
            w.serialize(r).map_err(csv_err)?;
        }
        w.flush().map_err(io_err(path))?;
    }
    fs::write(path, buf).map_err(io_err(path))
}

/// Write `metrics.csv`, `summary.json`, one `hist_<metric>.svg` per metric
/// and, when `comparisons` is non-empty, `comparison.csv` into `dir`.
/// Every file carries `config_hash`.
pub fn emit_report(
    dir: &Path,
    report: &EvalReport,
    comparisons: &[ComparisonRow],
    config_hash: &str,
    bins: usize,
) -> Result<ReportPaths, EvalError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let metrics_csv = dir.join("metrics.csv");
    write_csv(&metrics_csv, config_hash, &report.records)?;

    let summary_json = dir.join("summary.json");
    let file = SummaryFile {
        config_hash: config_hash.to_string(),
        summary: report.summary.clone(),
    };
    let json = serde_json::to_string_pretty(&file).map_err(|e| EvalError::Format(e.to_string()))?;
    fs::write(&summary_json, json + "\n").map_err(io_err(&summary_json))?;

    let mut histograms = Vec::new();
    for m in Metric::ALL {
        let values: Vec<f64> = report.records.iter().filter_map(|r| r.get(m)).collect();
        let h = histogram(&values, bins);
        let path = dir.join(format!("hist_{}.svg", m.name()));
        let svg = format!(
            "<!-- config_hash={config_hash} -->\n{}",
            svg_histogram(&h, m.name())
        );
        fs::write(&path, svg).map_err(io_err(&path))?;
        histograms.push(path);
    }

    let comparison_csv = if comparisons.is_empty() {
        None
    } else {
        let path = dir.join("comparison.csv");
        write_csv(&path, config_hash, comparisons)?;
        Some(path)
    };
    Ok(ReportPaths {
        metrics_csv,
        summary_json,
        histograms,
        comparison_csv,
    })
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricRecord>, EvalError> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(csv_err)?;
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err)
}

/// Read back `summary.json` as `(config_hash, stats)`.
pub fn read_summary_json(path: &Path) -> Result<(String, SummaryStats), EvalError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let f: SummaryFile =
        serde_json::from_slice(&bytes).map_err(|e| EvalError::Format(e.to_string()))?;
    Ok((f.config_hash, f.summary))
}

/// Write a standalone `comparison.csv` with its config hash line.
pub fn write_comparison_csv(
    path: &Path,
    rows: &[ComparisonRow],
    config_hash: &str,
) -> Result<(), EvalError> {
    write_csv(path, config_hash, rows)
}

pub fn read_comparison_csv(path: &Path) -> Result<Vec<ComparisonRow>, EvalError> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(csv_err)?;
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err)
}
