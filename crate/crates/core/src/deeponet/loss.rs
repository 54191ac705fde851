use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use super::DeepONetError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    MeanL2Relative,
}

impl std::str::FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mse" => Ok(LossKind::Mse),
            "mean_l2_relative" | "mean-l2-relative" => Ok(LossKind::MeanL2Relative),
            other => Err(format!("unknown loss '{other}'")),
        }
    }
}

/// Mean of squared residuals.
pub fn loss_mse(pred: &[f64], target: &[f64]) -> Result<f64, DeepONetError> {
    if pred.len() != target.len() {
        return Err(DeepONetError::Shape(format!(
            "{} predictions for {} targets",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(DeepONetError::EmptyInput);
    }
    let sum: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Mean over groups of `|pred - target|_2 / |target|_2`.
pub fn loss_mean_l2_relative<P: AsRef<[f64]>, T: AsRef<[f64]>>(
    preds: &[P],
    targets: &[T],
) -> Result<f64, DeepONetError> {
    if preds.len() != targets.len() {
        return Err(DeepONetError::Shape(format!(
            "{} prediction groups for {} target groups",
            preds.len(),
            targets.len()
        )));
    }
    if preds.is_empty() {
        return Err(DeepONetError::EmptyInput);
    }
    let mut total = 0.0;
    for (g, (p, t)) in preds.iter().zip(targets).enumerate() {
        let (p, t) = (p.as_ref(), t.as_ref());
        if p.len() != t.len() {
            return Err(DeepONetError::Shape(format!(
                "group {g}: {} predictions for {} targets",
                p.len(),
                t.len()
            )));
        }
        if p.is_empty() {
            return Err(DeepONetError::EmptyInput);
        }
        let tn = t.iter().map(|v| v * v).sum::<f64>().sqrt();
        if tn == 0.0 {
            return Err(DeepONetError::DegenerateTarget { group: g });
        }
        let rn = p
            .iter()
            .zip(t)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        total += rn / tn;
    }
    Ok(total / preds.len() as f64)
}

/// Loss over a `functions x queries` prediction matrix and its gradient with
/// respect to the predictions. Rows are the groups of the relative loss.
pub fn loss_and_grad(
    kind: LossKind,
    pred: ArrayView2<f64>,
    target: ArrayView2<f64>,
) -> Result<(f64, Array2<f64>), DeepONetError> {
    if pred.dim() != target.dim() {
        return Err(DeepONetError::Shape(format!(
            "prediction {:?} vs target {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    if pred.is_empty() {
        return Err(DeepONetError::EmptyInput);
    }
    match kind {
        LossKind::Mse => {
            let n = pred.len() as f64;
            let mut grad = &pred - &target;
            let loss = grad.iter().map(|r| r * r).sum::<f64>() / n;
            grad.mapv_inplace(|r| 2.0 * r / n);
            Ok((loss, grad))
        }
        LossKind::MeanL2Relative => {
            let groups = pred.nrows() as f64;
            let mut grad = &pred - &target;
            let mut loss = 0.0;
            for (g, (mut row, t)) in grad.rows_mut().into_iter().zip(target.rows()).enumerate() {
                let tn = t.dot(&t).sqrt();
                if tn == 0.0 {
                    return Err(DeepONetError::DegenerateTarget { group: g });
                }
                let rn = row.dot(&row).sqrt();
                loss += rn / tn;
                let scale = if rn > 0.0 {
                    1.0 / (rn * tn * groups)
                } else {
                    0.0
                };
                row.mapv_inplace(|r| r * scale);
            }
            Ok((loss / groups, grad))
        }
    }
}

/// Loss value only.
pub fn loss_value(
    kind: LossKind,
    pred: ArrayView2<f64>,
    target: ArrayView2<f64>,
) -> Result<f64, DeepONetError> {
    match kind {
        LossKind::Mse => {
            if pred.dim() != target.dim() {
                return Err(DeepONetError::Shape(format!(
                    "prediction {:?} vs target {:?}",
                    pred.dim(),
                    target.dim()
                )));
            }
            if pred.is_empty() {
                return Err(DeepONetError::EmptyInput);
            }
            let mut sum = 0.0;
            Zip::from(&pred)
                .and(&target)
                .for_each(|p, t| sum += (p - t) * (p - t));
            Ok(sum / pred.len() as f64)
        }
        LossKind::MeanL2Relative => loss_and_grad(kind, pred, target).map(|(l, _)| l),
    }
}
