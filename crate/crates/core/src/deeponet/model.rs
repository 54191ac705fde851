use std::collections::HashMap;

use ndarray::{s, Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::{loss_and_grad, LossKind};
use super::DeepONetError;
use crate::dataset::{Layout, OperatorDataset};
use crate::nn::{Activation, Mlp, MlpTape, Params};

/// Architecture of a branch/trunk network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeepONetConfig {
    /// `[m, hidden.., latent]`.
    pub branch: Vec<usize>,
    /// `[query_dim, hidden.., latent]`.
    pub trunk: Vec<usize>,
    pub activation: Activation,
    /// Activation applied to the trunk output before the inner product.
    pub trunk_output_activation: Activation,
    /// One branch network per latent index instead of a shared one.
    pub stacked: bool,
    pub output_bias: bool,
}

impl DeepONetConfig {
    /// `[n_sensors, 40, 40]` branch and `[query_dim, 40, 40]` trunk.
    pub fn standard(n_sensors: usize, query_dim: usize) -> Self {
        Self {
            branch: vec![n_sensors, 40, 40],
            trunk: vec![query_dim, 40, 40],
            activation: Activation::Relu,
            trunk_output_activation: Activation::Relu,
            stacked: false,
            output_bias: false,
        }
    }

    pub fn with_trunk_hidden(mut self, hidden: &[usize]) -> Self {
        let (first, last) = (self.trunk[0], *self.trunk.last().unwrap());
        self.trunk = std::iter::once(first)
            .chain(hidden.iter().copied())
            .chain([last])
            .collect();
        self
    }

    pub fn latent_dim(&self) -> usize {
        *self.trunk.last().unwrap_or(&0)
    }

    pub fn validate(&self) -> Result<(), DeepONetError> {
        if self.branch.len() < 2
            || self.trunk.len() < 2
            || self.branch.iter().chain(&self.trunk).any(|&s| s == 0)
        {
            return Err(DeepONetError::Shape(
                "layer size lists need at least two positive entries".into(),
            ));
        }
        if self.branch.last() != self.trunk.last() {
            return Err(DeepONetError::Shape(format!(
                "branch output {} differs from trunk output {}",
                self.branch.last().unwrap(),
                self.trunk.last().unwrap()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Branch {
    Unstacked(Mlp),
    Stacked(Vec<Mlp>),
}

impl Branch {
    fn networks(&self) -> &[Mlp] {
        match self {
            Branch::Unstacked(m) => std::slice::from_ref(m),
            Branch::Stacked(v) => v,
        }
    }

    fn networks_mut(&mut self) -> &mut [Mlp] {
        match self {
            Branch::Unstacked(m) => std::slice::from_mut(m),
            Branch::Stacked(v) => v,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeepONet {
    pub branch: Branch,
    pub trunk: Mlp,
    /// Empty, or one trainable scalar added to every prediction.
    pub bias: Vec<f64>,
    pub config: DeepONetConfig,
}

/// Query data in the form consumed by the batched forward pass: distinct
/// trunk points plus, for unaligned data, the point index of every
/// `(function, query)` pair.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorBatch {
    pub inputs: Array2<f64>,
    pub points: Array2<f64>,
    /// `None`: every function is queried at every point, in order.
    pub pair_index: Option<Array2<usize>>,
    pub targets: Array2<f64>,
}

impl OperatorBatch {
    pub fn from_dataset(d: &OperatorDataset) -> Self {
        match d.layout {
            Layout::Aligned => Self {
                inputs: d.inputs.values.clone(),
                points: d.points[0].clone(),
                pair_index: None,
                targets: d.targets.clone(),
            },
            Layout::Unaligned => {
                let dim = d.query_dim();
                let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
                let mut unique: Vec<f64> = Vec::new();
                let mut index = Array2::zeros(d.targets.dim());
                for i in 0..d.n_functions() {
                    for (q, p) in d.queries(i).rows().into_iter().enumerate() {
                        let key: Vec<u64> = p.iter().map(|v| v.to_bits()).collect();
                        let next = seen.len();
                        let k = *seen.entry(key).or_insert_with(|| {
                            unique.extend(p.iter());
                            next
                        });
                        index[[i, q]] = k;
                    }
                }
                let n_unique = seen.len();
                Self {
                    inputs: d.inputs.values.clone(),
                    points: Array2::from_shape_vec((n_unique, dim), unique)
                        .expect("dim values per point"),
                    pair_index: Some(index),
                    targets: d.targets.clone(),
                }
            }
        }
    }

    pub fn n_functions(&self) -> usize {
        self.inputs.nrows()
    }
}

/// Intermediate values of a batched forward pass.
pub struct ForwardCache {
    branch_tapes: Vec<MlpTape>,
    trunk_tape: MlpTape,
    branch_out: Array2<f64>,
    trunk_out: Array2<f64>,
    pub predictions: Array2<f64>,
}

impl DeepONet {
    pub fn new<R: Rng + ?Sized>(
        config: DeepONetConfig,
        rng: &mut R,
    ) -> Result<Self, DeepONetError> {
        config.validate()?;
        let act = config.activation;
        let branch = if config.stacked {
            let mut sizes = config.branch.clone();
            *sizes.last_mut().unwrap() = 1;
            Branch::Stacked(
                (0..config.latent_dim())
                    .map(|_| Mlp::glorot(&sizes, act, Activation::Identity, rng))
                    .collect(),
            )
        } else {
            Branch::Unstacked(Mlp::glorot(&config.branch, act, Activation::Identity, rng))
        };
        let trunk = Mlp::glorot(&config.trunk, act, config.trunk_output_activation, rng);
        let bias = if config.output_bias {
            vec![0.0]
        } else {
            Vec::new()
        };
        Ok(Self {
            branch,
            trunk,
            bias,
            config,
        })
    }

    /// Assemble from existing networks, checking widths against `config`.
    pub fn from_parts(
        config: DeepONetConfig,
        branch: Branch,
        trunk: Mlp,
        bias: Vec<f64>,
    ) -> Result<Self, DeepONetError> {
        config.validate()?;
        let l = config.latent_dim();
        let ok_branch = match &branch {
            Branch::Unstacked(m) => !config.stacked && m.layer_sizes() == config.branch,
            Branch::Stacked(v) => {
                let mut sizes = config.branch.clone();
                *sizes.last_mut().unwrap() = 1;
                config.stacked && v.len() == l && v.iter().all(|m| m.layer_sizes() == sizes)
            }
        };
        if !ok_branch
            || trunk.layer_sizes() != config.trunk
            || bias.len() != usize::from(config.output_bias)
        {
            return Err(DeepONetError::Shape(
                "networks do not match the configuration".into(),
            ));
        }
        Ok(Self {
            branch,
            trunk,
            bias,
            config,
        })
    }

    pub fn n_sensors(&self) -> usize {
        self.config.branch[0]
    }

    pub fn query_dim(&self) -> usize {
        self.config.trunk[0]
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim()
    }

    pub fn branch_networks(&self) -> &[Mlp] {
        self.branch.networks()
    }

    fn bias_value(&self) -> f64 {
        self.bias.first().copied().unwrap_or(0.0)
    }

    /// Branch outputs for a batch of input functions (`n x latent`).
    pub fn branch_outputs(&self, inputs: ArrayView2<f64>) -> Result<Array2<f64>, DeepONetError> {
        self.check_inputs(inputs)?;
        match &self.branch {
            Branch::Unstacked(m) => Ok(m.forward_batch(inputs)?),
            Branch::Stacked(v) => {
                let mut out = Array2::zeros((inputs.nrows(), v.len()));
                for (k, m) in v.iter().enumerate() {
                    out.column_mut(k)
                        .assign(&m.forward_batch(inputs)?.column(0));
                }
                Ok(out)
            }
        }
    }

    pub fn trunk_outputs(&self, points: ArrayView2<f64>) -> Result<Array2<f64>, DeepONetError> {
        self.check_points(points)?;
        Ok(self.trunk.forward_batch(points)?)
    }

    /// `G(u)(P)` for one input function and one query point.
    pub fn forward(&self, u: &[f64], p: &[f64]) -> Result<f64, DeepONetError> {
        let u = ArrayView2::from_shape((1, u.len()), u).expect("row view");
        let p = ArrayView2::from_shape((1, p.len()), p).expect("row view");
        let b = self.branch_outputs(u)?;
        let t = self.trunk_outputs(p)?;
        Ok(b.row(0).dot(&t.row(0)) + self.bias_value())
    }

    /// Predictions for every function at every point (`n_functions x n_points`).
    pub fn predict(
        &self,
        inputs: ArrayView2<f64>,
        points: ArrayView2<f64>,
    ) -> Result<Array2<f64>, DeepONetError> {
        let b = self.branch_outputs(inputs)?;
        let t = self.trunk_outputs(points)?;
        let mut pred = b.dot(&t.t());
        pred += self.bias_value();
        Ok(pred)
    }

    /// Predictions at the batch's query pairs (`n_functions x n_queries`).
    pub fn predict_batch(&self, batch: &OperatorBatch) -> Result<Array2<f64>, DeepONetError> {
        let b = self.branch_outputs(batch.inputs.view())?;
        let t = self.trunk_outputs(batch.points.view())?;
        Ok(self.combine(&b, &t, batch.pair_index.as_ref()))
    }

    pub fn predict_dataset(&self, d: &OperatorDataset) -> Result<Array2<f64>, DeepONetError> {
        self.predict_batch(&OperatorBatch::from_dataset(d))
    }

    fn combine(
        &self,
        b: &Array2<f64>,
        t: &Array2<f64>,
        index: Option<&Array2<usize>>,
    ) -> Array2<f64> {
        let mut pred = match index {
            None => b.dot(&t.t()),
            Some(idx) => {
                let mut out = Array2::zeros(idx.dim());
                for ((i, q), &k) in idx.indexed_iter() {
                    out[[i, q]] = b.row(i).dot(&t.row(k));
                }
                out
            }
        };
        pred += self.bias_value();
        pred
    }

    pub fn forward_cached(&self, batch: &OperatorBatch) -> Result<ForwardCache, DeepONetError> {
        self.check_inputs(batch.inputs.view())?;
        self.check_points(batch.points.view())?;
        let branch_tapes = self
            .branch
            .networks()
            .iter()
            .map(|m| m.forward_tape(batch.inputs.view()))
            .collect::<Result<Vec<_>, _>>()?;
        let branch_out = if branch_tapes.len() == 1 && !self.config.stacked {
            branch_tapes[0].output().clone()
        } else {
            let mut out = Array2::zeros((batch.n_functions(), branch_tapes.len()));
            for (k, tape) in branch_tapes.iter().enumerate() {
                out.column_mut(k).assign(&tape.output().column(0));
            }
            out
        };
        let trunk_tape = self.trunk.forward_tape(batch.points.view())?;
        let trunk_out = trunk_tape.output().clone();
        let predictions = self.combine(&branch_out, &trunk_out, batch.pair_index.as_ref());
        Ok(ForwardCache {
            branch_tapes,
            trunk_tape,
            branch_out,
            trunk_out,
            predictions,
        })
    }

    /// Gradients given dL/dpredictions, returned in a model-shaped container.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        batch: &OperatorBatch,
        grad_pred: &Array2<f64>,
    ) -> DeepONet {
        let (grad_b, grad_t) = match batch.pair_index.as_ref() {
            None => (
                grad_pred.dot(&cache.trunk_out),
                grad_pred.t().dot(&cache.branch_out),
            ),
            Some(idx) => {
                let mut gb = Array2::zeros(cache.branch_out.dim());
                let mut gt = Array2::zeros(cache.trunk_out.dim());
                for ((i, q), &k) in idx.indexed_iter() {
                    let g = grad_pred[[i, q]];
                    if g == 0.0 {
                        continue;
                    }
                    gb.row_mut(i).scaled_add(g, &cache.trunk_out.row(k));
                    gt.row_mut(k).scaled_add(g, &cache.branch_out.row(i));
                }
                (gb, gt)
            }
        };
        let branch = match &self.branch {
            Branch::Unstacked(m) => {
                Branch::Unstacked(m.backward(&cache.branch_tapes[0], grad_b, false).0)
            }
            Branch::Stacked(v) => Branch::Stacked(
                v.iter()
                    .enumerate()
                    .map(|(k, m)| {
                        let g = grad_b.slice(s![.., k..k + 1]).to_owned();
                        m.backward(&cache.branch_tapes[k], g, false).0
                    })
                    .collect(),
            ),
        };
        let trunk = self.trunk.backward(&cache.trunk_tape, grad_t, false).0;
        let bias = if self.bias.is_empty() {
            Vec::new()
        } else {
            vec![grad_pred.sum()]
        };
        DeepONet {
            branch,
            trunk,
            bias,
            config: self.config.clone(),
        }
    }

    /// Loss over the batch and its gradient.
    pub fn loss_and_gradients(
        &self,
        batch: &OperatorBatch,
        kind: LossKind,
    ) -> Result<(f64, DeepONet), DeepONetError> {
        let cache = self.forward_cached(batch)?;
        let (loss, grad_pred) =
            loss_and_grad(kind, cache.predictions.view(), batch.targets.view())?;
        Ok((loss, self.backward(&cache, batch, &grad_pred)))
    }

    fn check_inputs(&self, inputs: ArrayView2<f64>) -> Result<(), DeepONetError> {
        if inputs.ncols() != self.n_sensors() {
            return Err(DeepONetError::Shape(format!(
                "branch expects {} sensor values, got {}",
                self.n_sensors(),
                inputs.ncols()
            )));
        }
        Ok(())
    }

    fn check_points(&self, points: ArrayView2<f64>) -> Result<(), DeepONetError> {
        if points.ncols() != self.query_dim() {
            return Err(DeepONetError::Shape(format!(
                "trunk expects {}-dimensional points, got {}",
                self.query_dim(),
                points.ncols()
            )));
        }
        Ok(())
    }
}

impl Params for DeepONet {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.branch.networks().iter().for_each(|m| m.visit(f));
        self.trunk.visit(f);
        f(&self.bias);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.branch
            .networks_mut()
            .iter_mut()
            .for_each(|m| m.visit_mut(f));
        self.trunk.visit_mut(f);
        f(&mut self.bias);
    }
}
