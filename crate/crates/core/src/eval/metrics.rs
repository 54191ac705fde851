use serde::{Deserialize, Serialize};

use super::EvalError;

fn check(pred: &[f64], target: &[f64]) -> Result<(), EvalError> {
    if pred.len() != target.len() {
        return Err(EvalError::Length {
            pred: pred.len(),
            target: target.len(),
        });
    }
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

/// Coefficient of determination `1 - SS_res / SS_tot`.
pub fn r2(pred: &[f64], target: &[f64]) -> Result<f64, EvalError> {
    check(pred, target)?;
    if target.len() < 2 {
        return Err(EvalError::Empty);
    }
    let mean = target.iter().sum::<f64>() / target.len() as f64;
    let ss_tot: f64 = target.iter().map(|t| (t - mean) * (t - mean)).sum();
    if ss_tot == 0.0 {
        return Err(EvalError::DegenerateVariance);
    }
    let ss_res: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (t - p) * (t - p))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64, EvalError> {
    check(pred, target)?;
    Ok(pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len() as f64)
}

pub fn mae(pred: &[f64], target: &[f64]) -> Result<f64, EvalError> {
    check(pred, target)?;
    Ok(pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / pred.len() as f64)
}

pub fn rmse_mae_ratio(pred: &[f64], target: &[f64]) -> Result<f64, EvalError> {
    let m = mae(pred, target)?;
    if m == 0.0 {
        return Err(EvalError::ZeroMae);
    }
    Ok(mse(pred, target)?.sqrt() / m)
}

/// Metrics of one test function over its query points. `r2` and
/// `rmse_mae_ratio` are `None` where they are undefined (constant target,
/// zero error).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub function_id: usize,
    pub r2: Option<f64>,
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    pub rmse_mae_ratio: Option<f64>,
}

impl MetricRecord {
    pub fn compute(function_id: usize, pred: &[f64], target: &[f64]) -> Result<Self, EvalError> {
        let mse = mse(pred, target)?;
        let mae = mae(pred, target)?;
        let r2 = match r2(pred, target) {
            Ok(v) => Some(v),
            Err(EvalError::DegenerateVariance | EvalError::Empty) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            function_id,
            r2,
            mse,
            rmse: mse.sqrt(),
            mae,
            rmse_mae_ratio: (mae > 0.0).then(|| mse.sqrt() / mae),
        })
    }

    /// Value of a metric by name.
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::R2 => self.r2,
            Metric::Mse => Some(self.mse),
            Metric::Rmse => Some(self.rmse),
            Metric::Mae => Some(self.mae),
            Metric::RmseMaeRatio => self.rmse_mae_ratio,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    R2,
    Mse,
    Rmse,
    Mae,
    RmseMaeRatio,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::R2,
        Metric::Mse,
        Metric::Rmse,
        Metric::Mae,
        Metric::RmseMaeRatio,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::R2 => "r2",
            Metric::Mse => "mse",
            Metric::Rmse => "rmse",
            Metric::Mae => "mae",
            Metric::RmseMaeRatio => "rmse_mae_ratio",
        }
    }
}
