use serde::{Deserialize, Serialize};

use super::SolverError;
use crate::grf::evaluate_function;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeConfig {
    pub n_steps: usize,
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self { n_steps: 1000 }
    }
}

/// Solution of `ds/dx = u(x)`, `s(x0) = 0` on the RK node grid.
#[derive(Clone, Debug, PartialEq)]
pub struct OdeSolution {
    pub xs: Vec<f64>,
    pub s: Vec<f64>,
    pub u_ref: Vec<f64>,
}

/// Classical fourth-order Runge-Kutta for `ds/dx = f(x)` from `s(a) = 0`
/// with `n_steps` equal steps over `[a, b]`. Returns the node grid and the
/// solution at every node.
pub fn rk4_antiderivative<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    n_steps: usize,
) -> (Vec<f64>, Vec<f64>) {
    let h = (b - a) / n_steps as f64;
    let node = |i: usize| a + (b - a) * i as f64 / n_steps as f64;
    let mut xs = Vec::with_capacity(n_steps + 1);
    let mut s = Vec::with_capacity(n_steps + 1);
    let mut acc = 0.0;
    xs.push(a);
    s.push(acc);
    for i in 0..n_steps {
        let x = node(i);
        let k1 = f(x);
        let k2 = f(x + 0.5 * h);
        let k3 = k2;
        let k4 = f(node(i + 1));
        acc += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        xs.push(node(i + 1));
        s.push(acc);
    }
    (xs, s)
}

/// Integrate an input function given at sensors (piecewise-linear between
/// them) over the full sensor range.
pub fn solve_antiderivative(
    u: &[f64],
    sensors: &[f64],
    cfg: &OdeConfig,
) -> Result<OdeSolution, SolverError> {
    if u.len() != sensors.len() || sensors.len() < 2 {
        return Err(SolverError::Input(
            "input function must match at least two sensors".into(),
        ));
    }
    if cfg.n_steps == 0 {
        return Err(SolverError::Input("need at least one RK step".into()));
    }
    let (a, b) = (sensors[0], sensors[sensors.len() - 1]);
    let f = |x: f64| {
        evaluate_function(u, sensors, x.clamp(a, b)).expect("clamped into the sensor range")
    };
    let (xs, s) = rk4_antiderivative(f, a, b, cfg.n_steps);
    Ok(OdeSolution {
        xs,
        s,
        u_ref: u.to_vec(),
    })
}
