//! Per-function metrics, table-style summaries, the RMSE/MAE diagnostic and
//! the erosion post-analysis.

mod erosion;
mod metrics;
mod report;

pub use erosion::{
    erosion_assessment, erosion_velocity, ErosionAssessment, DEFAULT_EROSION_C, WATER_DENSITY,
};
pub use metrics::{mae, mse, r2, rmse_mae_ratio, Metric, MetricRecord};
pub use report::{
    emit_report, histogram, read_comparison_csv, read_metrics_csv, read_summary_json,
    svg_histogram, write_comparison_csv, ComparisonRow, Histogram, ReportPaths,
};

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::OperatorDataset;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {pred} predictions, {target} targets")]
    Length { pred: usize, target: usize },
    #[error("not enough values")]
    Empty,
    #[error("target has zero variance")]
    DegenerateVariance,
    #[error("mean absolute error is zero")]
    ZeroMae,
    #[error("grids are not congruent")]
    Grid,
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serialisation error: {0}")]
    Format(String),
    #[error("prediction failed: {0}")]
    Predict(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// Records that define the metric.
    pub count: usize,
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some(Self {
            mean,
            std: var.sqrt(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            count: values.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n_records: usize,
    pub r2: Option<MetricSummary>,
    pub mse: Option<MetricSummary>,
    pub rmse: Option<MetricSummary>,
    pub mae: Option<MetricSummary>,
    pub rmse_mae_ratio: Option<MetricSummary>,
    /// Function with the highest R².
    pub argmax_id: Option<usize>,
    /// Function with the lowest R².
    pub argmin_id: Option<usize>,
}

impl SummaryStats {
    pub fn from_records(records: &[MetricRecord]) -> Self {
        let col = |m: Metric| -> Vec<f64> { records.iter().filter_map(|r| r.get(m)).collect() };
        let defined_r2 = || {
            records
                .iter()
                .filter_map(|r| r.r2.map(|v| (r.function_id, v)))
        };
        // Ties resolve to the first record.
        let argmax_id = defined_r2().fold(None, |best: Option<(usize, f64)>, (id, v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((id, v)),
        });
        let argmin_id = defined_r2().fold(None, |best: Option<(usize, f64)>, (id, v)| match best {
            Some((_, b)) if b <= v => best,
            _ => Some((id, v)),
        });
        Self {
            n_records: records.len(),
            r2: MetricSummary::of(&col(Metric::R2)),
            mse: MetricSummary::of(&col(Metric::Mse)),
            rmse: MetricSummary::of(&col(Metric::Rmse)),
            mae: MetricSummary::of(&col(Metric::Mae)),
            rmse_mae_ratio: MetricSummary::of(&col(Metric::RmseMaeRatio)),
            argmax_id: argmax_id.map(|(id, _)| id),
            argmin_id: argmin_id.map(|(id, _)| id),
        }
    }

    pub fn get(&self, metric: Metric) -> Option<&MetricSummary> {
        match metric {
            Metric::R2 => self.r2.as_ref(),
            Metric::Mse => self.mse.as_ref(),
            Metric::Rmse => self.rmse.as_ref(),
            Metric::Mae => self.mae.as_ref(),
            Metric::RmseMaeRatio => self.rmse_mae_ratio.as_ref(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub records: Vec<MetricRecord>,
    pub summary: SummaryStats,
}

impl EvalReport {
    pub fn record(&self, function_id: usize) -> Option<&MetricRecord> {
        self.records.iter().find(|r| r.function_id == function_id)
    }
}

/// Metrics for a `functions x queries` prediction matrix against `targets`.
pub fn evaluate_predictions(
    pred: ArrayView2<f64>,
    targets: ArrayView2<f64>,
) -> Result<EvalReport, EvalError> {
    if pred.dim() != targets.dim() {
        return Err(EvalError::Length {
            pred: pred.len(),
            target: targets.len(),
        });
    }
    if pred.nrows() == 0 {
        return Err(EvalError::Empty);
    }
    let records = (0..pred.nrows())
        .into_par_iter()
        .map(|i| MetricRecord::compute(i, &pred.row(i).to_vec(), &targets.row(i).to_vec()))
        .collect::<Result<Vec<_>, _>>()?;
    let summary = SummaryStats::from_records(&records);
    Ok(EvalReport { records, summary })
}

/// Evaluate a predictor function by function. `predict(i, points)` returns
/// predictions of function `i` at its query points. The predictor must not
/// mutate the model, so evaluation is zero-shot by construction.
pub fn evaluate_model<F, E>(predict: F, dataset: &OperatorDataset) -> Result<EvalReport, EvalError>
where
    F: Fn(usize, ArrayView2<f64>) -> Result<Vec<f64>, E> + Sync,
    E: std::fmt::Display,
{
    let n = dataset.n_functions();
    if n == 0 {
        return Err(EvalError::Empty);
    }
    let rows = (0..n)
        .into_par_iter()
        .map(|i| predict(i, dataset.queries(i)).map_err(|e| EvalError::Predict(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let mut pred = Array2::zeros(dataset.targets.dim());
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dataset.n_queries() {
            return Err(EvalError::Length {
                pred: row.len(),
                target: dataset.n_queries(),
            });
        }
        pred.row_mut(i)
            .assign(&ndarray::ArrayView1::from(row.as_slice()));
    }
    evaluate_predictions(pred.view(), dataset.targets.view())
}
