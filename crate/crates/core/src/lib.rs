//! Operator learning with DeepONet.
//!
//! The crate generates operator-learning datasets for three problems (an
//! antiderivative ODE, a diffusion-reaction PDE and viscous Burgers), trains
//! branch/trunk DeepONets and per-function FCN/CNN baselines on them with a
//! small from-scratch network engine, and evaluates the results.

pub mod baselines;
pub mod dataset;
pub mod deeponet;
pub mod eval;
pub mod grf;
pub mod nn;
pub mod rng;
pub mod solvers;

#[cfg(any(test, feature = "oracles"))]
pub mod oracles;

pub use dataset::{Layout, OperatorDataset, ProblemId};
pub use deeponet::{DeepONet, DeepONetConfig, TrainConfig};
pub use eval::{EvalReport, MetricRecord};
