use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::solvers::Grid2D;

/// Empirical erosion constant `C` for continuous service, in sqrt(kg/m)/s units.
pub const DEFAULT_EROSION_C: f64 = 240.0;
/// Fluid density in kg/m³.
pub const WATER_DENSITY: f64 = 1000.0;

/// Erosional velocity `V_e = C / sqrt(rho)` in m/s.
pub fn erosion_velocity(c: f64, rho: f64) -> f64 {
    c / rho.sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErosionAssessment {
    pub erosion_velocity: f64,
    pub max_speed_true: f64,
    pub max_speed_pred: f64,
    /// `(x, t)` of the largest squared residual.
    pub worst_point: (f64, f64),
    pub speed_true_at_worst: f64,
    pub speed_pred_at_worst: f64,
    /// Predicted over simulated speed at the worst point.
    pub risk_ratio: f64,
    /// `(pred - sim)^2` over the grid.
    pub squared_residual: Array2<f64>,
}

impl ErosionAssessment {
    pub fn true_exceeds(&self) -> bool {
        self.max_speed_true > self.erosion_velocity
    }

    pub fn pred_exceeds(&self) -> bool {
        self.max_speed_pred > self.erosion_velocity
    }
}

/// Compare a simulated and a predicted velocity field. Ties in the squared
/// residual resolve to the first node in row-major `(x, t)` order.
pub fn erosion_assessment(
    sim: &Grid2D,
    pred: &Grid2D,
    c: f64,
    rho: f64,
) -> Result<ErosionAssessment, EvalError> {
    if !sim.is_congruent(pred) {
        return Err(EvalError::Grid);
    }
    let mut sq = Array2::zeros(sim.values.dim());
    Zip::from(&mut sq)
        .and(&sim.values)
        .and(&pred.values)
        .for_each(|r, s, p| *r = (p - s) * (p - s));
    let mut worst = (0, 0);
    for ((i, j), &v) in sq.indexed_iter() {
        if v > sq[worst] {
            worst = (i, j);
        }
    }
    let speed_true = sim.values[worst].abs();
    let speed_pred = pred.values[worst].abs();
    let risk_ratio = if speed_true == speed_pred {
        1.0
    } else {
        speed_pred / speed_true
    };
    let max_abs = |g: &Grid2D| g.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(ErosionAssessment {
        erosion_velocity: erosion_velocity(c, rho),
        max_speed_true: max_abs(sim),
        max_speed_pred: max_abs(pred),
        worst_point: (sim.x[worst.0], sim.t[worst.1]),
        speed_true_at_worst: speed_true,
        speed_pred_at_worst: speed_pred,
        risk_ratio,
        squared_residual: sq,
    })
}
