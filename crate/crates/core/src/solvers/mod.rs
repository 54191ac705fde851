//! Ground-truth solvers for the three operator-learning problems.

pub mod burgers;
pub mod diffusion;
pub mod fft;
pub mod ode;

pub use burgers::{solve_burgers, BurgersConfig, BurgersSolution};
pub use diffusion::{solve_diffusion_reaction, DiffusionConfig};
pub use ode::{rk4_antiderivative, solve_antiderivative, OdeConfig, OdeSolution};

use ndarray::Array2;
use thiserror::Error;

use crate::grf::GrfError;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("solution blew up: |s| = {magnitude:e} at t = {time}")]
    BlowUp { magnitude: f64, time: f64 },
    #[error("CFL condition violated at t = {time}: Courant number {courant}")]
    Stability { time: f64, courant: f64 },
    #[error("non-finite values in the solution at t = {time}")]
    NonFinite { time: f64 },
    #[error("invalid solver input: {0}")]
    Input(String),
    #[error(transparent)]
    Grf(#[from] GrfError),
}

/// Solution sampled on a uniform space-time grid; `values[[i, j]]` is the
/// solution at `x[i]`, `t[j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid2D {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub values: Array2<f64>,
}

impl Grid2D {
    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn nt(&self) -> usize {
        self.t.len()
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.t[0], self.t[self.t.len() - 1])
    }

    pub fn is_congruent(&self, other: &Grid2D) -> bool {
        self.x == other.x && self.t == other.t
    }
}

/// `n` uniformly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// `n` uniformly spaced points on the periodic interval `[a, a + length)`.
pub fn periodic_grid(a: f64, length: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + length * i as f64 / n as f64).collect()
}
