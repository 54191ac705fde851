use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{linspace, Grid2D, SolverError};
use crate::grf::evaluate_function;

/// `ds/dt = D s_xx + k s^2 + u(x)` on `x in (0, L)`, `t in (0, T]` with
/// `s(x, 0) = 0` and `s(0, t) = s(L, t) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionConfig {
    pub diffusivity: f64,
    pub reaction: f64,
    pub length: f64,
    pub t_end: f64,
    /// Output grid size in x (including both boundaries).
    pub nx: usize,
    /// Output grid size in t (including t = 0).
    pub nt: usize,
    /// Internal spatial refinement: the scheme runs on
    /// `(nx - 1) * refinement + 1` nodes.
    pub refinement: usize,
    /// Upper bound on `D dt / dx^2`.
    pub max_diffusion_number: f64,
    /// Upper bound on `k |s| dt`.
    pub max_reaction_number: f64,
    pub blowup_threshold: f64,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        Self {
            diffusivity: 0.01,
            reaction: 0.05,
            length: 1.0,
            t_end: 1.0,
            nx: 100,
            nt: 100,
            refinement: 2,
            max_diffusion_number: 0.25,
            max_reaction_number: 0.1,
            blowup_threshold: 1e6,
        }
    }
}

/// Explicit forward-Euler finite differences with automatic sub-stepping.
/// Every output time is hit exactly; the returned grid is `nx x nt`.
pub fn solve_diffusion_reaction(
    u: &[f64],
    sensors: &[f64],
    cfg: &DiffusionConfig,
) -> Result<Grid2D, SolverError> {
    if cfg.nx < 3 || cfg.nt < 2 || cfg.refinement == 0 {
        return Err(SolverError::Input(
            "grid needs nx >= 3, nt >= 2, refinement >= 1".into(),
        ));
    }
    if u.len() != sensors.len() {
        return Err(SolverError::Input(
            "input function must match sensors".into(),
        ));
    }
    let n = (cfg.nx - 1) * cfg.refinement + 1;
    let xs = linspace(0.0, cfg.length, n);
    let source = xs
        .iter()
        .map(|&x| evaluate_function(u, sensors, x))
        .collect::<Result<Vec<_>, _>>()?;
    let dx = cfg.length / (n - 1) as f64;
    let inv_dx2 = 1.0 / (dx * dx);
    let (d, k) = (cfg.diffusivity, cfg.reaction);
    let dt_diffusion = cfg.max_diffusion_number * dx * dx / d;

    let t_out = linspace(0.0, cfg.t_end, cfg.nt);
    let mut values = Array2::zeros((cfg.nx, cfg.nt));
    let mut s = vec![0.0f64; n];
    let mut next = vec![0.0f64; n];
    for j in 1..cfg.nt {
        let interval = t_out[j] - t_out[j - 1];
        let peak = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let dt_reaction = if k * peak > 0.0 {
            cfg.max_reaction_number / (k.abs() * peak)
        } else {
            f64::INFINITY
        };
        let dt_max = dt_diffusion.min(dt_reaction);
        let n_sub = (interval / dt_max).ceil().max(1.0) as usize;
        let dt = interval / n_sub as f64;
        for step in 0..n_sub {
            for i in 1..n - 1 {
                let lap = (s[i - 1] + s[i + 1]) - 2.0 * s[i];
                next[i] = s[i] + dt * (d * lap * inv_dx2 + k * s[i] * s[i] + source[i]);
            }
            std::mem::swap(&mut s, &mut next);
            let peak = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let time = t_out[j - 1] + dt * (step + 1) as f64;
            if !peak.is_finite() {
                return Err(SolverError::NonFinite { time });
            }
            if peak > cfg.blowup_threshold {
                return Err(SolverError::BlowUp {
                    magnitude: peak,
                    time,
                });
            }
        }
        for i in 0..cfg.nx {
            values[[i, j]] = s[i * cfg.refinement];
        }
    }
    Ok(Grid2D {
        x: linspace(0.0, cfg.length, cfg.nx),
        t: t_out,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sensors() -> Vec<f64> {
        linspace(0.0, 1.0, 100)
    }

    #[test]
    fn zero_source_is_fixed_point() {
        let g = solve_diffusion_reaction(&vec![0.0; 100], &sensors(), &DiffusionConfig::default())
            .unwrap();
        assert!(g.values.iter().all(|&v| v == 0.0));
        assert_eq!(g.values.dim(), (100, 100));
    }

    #[test]
    fn constant_source_gives_mirror_symmetric_solution() {
        let g = solve_diffusion_reaction(&vec![0.7; 100], &sensors(), &DiffusionConfig::default())
            .unwrap();
        for j in 0..g.nt() {
            for i in 0..g.nx() {
                assert_eq!(g.values[[i, j]], g.values[[g.nx() - 1 - i, j]]);
            }
        }
        assert!(g.values[[50, 99]] > 0.0);
    }

    #[test]
    fn boundaries_and_initial_row_are_zero() {
        let u: Vec<f64> = sensors().iter().map(|x| (3.0 * x).sin() + 0.5).collect();
        let g = solve_diffusion_reaction(&u, &sensors(), &DiffusionConfig::default()).unwrap();
        for j in 0..g.nt() {
            assert_eq!(g.values[[0, j]], 0.0);
            assert_eq!(g.values[[99, j]], 0.0);
        }
        assert!(g.values.column(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn superlinear_reaction_blows_up() {
        let cfg = DiffusionConfig {
            reaction: 50.0,
            t_end: 10.0,
            ..DiffusionConfig::default()
        };
        let err = solve_diffusion_reaction(&vec![5.0; 100], &sensors(), &cfg).unwrap_err();
        assert!(matches!(err, SolverError::BlowUp { .. }), "{err}");
    }
}
