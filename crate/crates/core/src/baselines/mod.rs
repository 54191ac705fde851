//! Per-function point regressors used as comparison models: a small fully
//! connected network and a 1-D convolutional network, both mapping a query
//! point `P` to `s(P)` for one fixed input function.
//!
//! The CNN reads an `n`-feature point as a single-channel sequence of length
//! `n`. A kernel-1 convolution lifts it to 32 channels, which are flattened
//! channel-major to `32 n` features before dropout and the dense head. For
//! `n = 1` this is the published layer listing exactly; for `n = 2` the first
//! dense layer takes 64 inputs instead of 32.

use std::path::Path;

use ndarray::{Array2, Array3, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{BaselineDataset, ProblemId};
use crate::nn::checkpoint::{self, CheckpointHeader, NetworkSpec};
use crate::nn::{Activation, AdamConfig, AdamState, Conv1d, Dropout, Mlp, NnError, Params};
use crate::rng::{child_seed, seeded, tagged_seed};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("empty training set")]
    Empty,
    #[error("input has {got} features, model expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("training diverged in epoch {epoch}")]
    Divergence {
        epoch: usize,
        history: Vec<EpochRow>,
    },
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Fcn,
    Cnn,
}

impl BaselineKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BaselineKind::Fcn => "fcn",
            BaselineKind::Cnn => "cnn",
        }
    }
}

impl std::str::FromStr for BaselineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fcn" => Ok(BaselineKind::Fcn),
            "cnn" => Ok(BaselineKind::Cnn),
            other => Err(format!("unknown baseline model '{other}'")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl BaselineTrainConfig {
    pub fn fcn(seed: u64) -> Self {
        Self {
            epochs: 2000,
            batch_size: 10,
            adam: AdamConfig::default(),
            seed,
        }
    }

    pub fn cnn(seed: u64) -> Self {
        Self {
            batch_size: 20,
            ..Self::fcn(seed)
        }
    }

    pub fn for_kind(kind: BaselineKind, seed: u64) -> Self {
        match kind {
            BaselineKind::Fcn => Self::fcn(seed),
            BaselineKind::Cnn => Self::cnn(seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    /// Mean mini-batch loss over the epoch.
    pub train_loss: f64,
}

/// `[n, hidden.., 1]` ReLU network.
#[derive(Clone, Debug, PartialEq)]
pub struct Fcn {
    pub mlp: Mlp,
}

pub const FCN_HIDDEN: [usize; 2] = [30, 30];

impl Fcn {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        let sizes: Vec<usize> = std::iter::once(input_dim)
            .chain(hidden.iter().copied())
            .chain([1])
            .collect();
        Self {
            mlp: Mlp::glorot(&sizes, Activation::Relu, Activation::Identity, rng),
        }
    }
}

/// Conv1d(1 -> 32, kernel 1) -> tanh -> flatten -> dropout -> dense(2048, tanh) -> dense(1).
#[derive(Clone, Debug, PartialEq)]
pub struct Cnn {
    pub conv: Conv1d,
    pub head: Mlp,
    pub dropout: Dropout,
}

pub const CNN_CHANNELS: usize = 32;
pub const CNN_HIDDEN: usize = 2048;
pub const CNN_DROPOUT: f64 = 0.5;

struct CnnTape {
    input: Array3<f64>,
    conv_out: Array3<f64>,
    mask: Array2<f64>,
    head: crate::nn::MlpTape,
}

impl Cnn {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, rng: &mut R) -> Self {
        let conv = Conv1d::glorot(1, CNN_CHANNELS, 1, 1, rng);
        let head = Mlp::glorot(
            &[CNN_CHANNELS * input_dim, CNN_HIDDEN, 1],
            Activation::Tanh,
            Activation::Identity,
            rng,
        );
        Self {
            conv,
            head,
            dropout: Dropout::new(CNN_DROPOUT),
        }
    }

    fn input_dim(&self) -> usize {
        self.head.input_dim() / self.conv.out_channels()
    }

    /// Convolution and flatten; returns the tanh feature map and its flat view.
    fn features(
        &self,
        x: ArrayView2<f64>,
    ) -> Result<(Array3<f64>, Array3<f64>, Array2<f64>), BaselineError> {
        let (b, n) = x.dim();
        let input = x.to_owned().insert_axis(Axis(1));
        let mut conv_out = self.conv.forward(input.view())?;
        conv_out.mapv_inplace(f64::tanh);
        let flat = conv_out
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((b, self.conv.out_channels() * n))
            .expect("channel-major flatten");
        Ok((input, conv_out, flat))
    }

    fn forward_train<R: Rng + ?Sized>(
        &self,
        x: ArrayView2<f64>,
        rng: &mut R,
    ) -> Result<CnnTape, BaselineError> {
        let (input, conv_out, flat) = self.features(x)?;
        let mask: Array2<f64> = self.dropout.sample_mask(flat.dim(), rng);
        let head = self.head.forward_tape((&flat * &mask).view())?;
        Ok(CnnTape {
            input,
            conv_out,
            mask,
            head,
        })
    }

    fn backward(&self, tape: &CnnTape, grad_out: Array2<f64>) -> Cnn {
        let (head, grad_flat) = self.head.backward(&tape.head, grad_out, true);
        let grad_flat = grad_flat.expect("input gradient requested") * &tape.mask;
        let mut grad_conv = grad_flat
            .into_shape_with_order(tape.conv_out.dim())
            .expect("inverse of flatten");
        ndarray::Zip::from(&mut grad_conv)
            .and(&tape.conv_out)
            .for_each(|g, &y| *g *= 1.0 - y * y);
        let (conv, _) = self.conv.backward(tape.input.view(), grad_conv.view());
        Cnn {
            conv,
            head,
            dropout: self.dropout,
        }
    }
}

impl Params for Fcn {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.mlp.visit(f)
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.mlp.visit_mut(f)
    }
}

impl Params for Cnn {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.conv.visit(f);
        self.head.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.conv.visit_mut(f);
        self.head.visit_mut(f);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BaselineModel {
    Fcn(Fcn),
    Cnn(Cnn),
}

impl BaselineModel {
    pub fn kind(&self) -> BaselineKind {
        match self {
            BaselineModel::Fcn(_) => BaselineKind::Fcn,
            BaselineModel::Cnn(_) => BaselineKind::Cnn,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            BaselineModel::Fcn(m) => m.mlp.input_dim(),
            BaselineModel::Cnn(m) => m.input_dim(),
        }
    }

    /// Deterministic evaluation (dropout off) of a batch of points.
    pub fn predict(&self, points: ArrayView2<f64>) -> Result<Vec<f64>, BaselineError> {
        if points.ncols() != self.input_dim() {
            return Err(BaselineError::Dimension {
                expected: self.input_dim(),
                got: points.ncols(),
            });
        }
        let out = match self {
            BaselineModel::Fcn(m) => m.mlp.forward_batch(points)?,
            BaselineModel::Cnn(m) => {
                let (_, _, flat) = m.features(points)?;
                m.head.forward_batch(flat.view())?
            }
        };
        Ok(out.column(0).to_vec())
    }

    pub fn predict_one(&self, p: &[f64]) -> Result<f64, BaselineError> {
        let view = ArrayView2::from_shape((1, p.len()), p).expect("row view");
        Ok(self.predict(view)?[0])
    }

    pub fn flatten(&self) -> Vec<f64> {
        match self {
            BaselineModel::Fcn(m) => m.flatten(),
            BaselineModel::Cnn(m) => m.flatten(),
        }
    }
}

pub struct TrainedBaseline {
    pub model: BaselineModel,
    pub history: Vec<EpochRow>,
    pub steps: u64,
}

fn mse_grad(pred: &Array2<f64>, target: &[f64]) -> (f64, Array2<f64>) {
    let n = target.len() as f64;
    let mut g = pred.clone();
    let mut loss = 0.0;
    for (gi, t) in g.iter_mut().zip(target) {
        let r = *gi - t;
        loss += r * r;
        *gi = 2.0 * r / n;
    }
    (loss / n, g)
}

/// Shared mini-batch loop. `step` computes loss and gradients for one batch.
fn train_loop<M, F>(
    model: &mut M,
    data: &BaselineDataset,
    cfg: &BaselineTrainConfig,
    mut step: F,
) -> Result<(Vec<EpochRow>, u64), BaselineError>
where
    M: Params,
    F: FnMut(&M, ArrayView2<f64>, &[f64], &mut crate::rng::Rng) -> Result<(f64, M), BaselineError>,
{
    let n = data.n_train();
    if n == 0 || cfg.batch_size == 0 {
        return Err(BaselineError::Empty);
    }
    let mut adam = AdamState::for_params(cfg.adam, model);
    let base = tagged_seed(cfg.seed, "baseline-epochs");
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..n).collect();
    let dim = data.input_dim();
    for epoch in 0..cfg.epochs {
        let mut rng = seeded(child_seed(base, epoch as u64));
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let x = Array2::from_shape_fn((chunk.len(), dim), |(r, c)| {
                data.train_points[[chunk[r], c]]
            });
            let y: Vec<f64> = chunk.iter().map(|&k| data.train_targets[k]).collect();
            let (loss, grads) = match step(model, x.view(), &y, &mut rng) {
                Ok(v) => v,
                Err(BaselineError::Nn(NnError::NonFinite { .. })) => {
                    return Err(BaselineError::Divergence { epoch, history })
                }
                Err(e) => return Err(e),
            };
            if !loss.is_finite() {
                return Err(BaselineError::Divergence { epoch, history });
            }
            adam.step(model, &grads)?;
            total += loss;
            batches += 1;
        }
        history.push(EpochRow {
            epoch: epoch + 1,
            train_loss: total / batches as f64,
        });
    }
    Ok((history, adam.step_count))
}

fn init_rng(cfg: &BaselineTrainConfig, kind: BaselineKind) -> crate::rng::Rng {
    seeded(tagged_seed(cfg.seed, &format!("{}-init", kind.as_str())))
}

/// Glorot-initialised FCN as used by [`train_fcn`] with this config.
pub fn initial_fcn(input_dim: usize, hidden: &[usize], cfg: &BaselineTrainConfig) -> Fcn {
    Fcn::new(input_dim, hidden, &mut init_rng(cfg, BaselineKind::Fcn))
}

pub fn initial_cnn(input_dim: usize, cfg: &BaselineTrainConfig) -> Cnn {
    Cnn::new(input_dim, &mut init_rng(cfg, BaselineKind::Cnn))
}

pub fn train_fcn(
    data: &BaselineDataset,
    cfg: &BaselineTrainConfig,
) -> Result<TrainedBaseline, BaselineError> {
    train_fcn_with(data, cfg, &FCN_HIDDEN)
}

pub fn train_fcn_with(
    data: &BaselineDataset,
    cfg: &BaselineTrainConfig,
    hidden: &[usize],
) -> Result<TrainedBaseline, BaselineError> {
    let mut model = initial_fcn(data.input_dim(), hidden, cfg);
    let (history, steps) = train_loop(&mut model, data, cfg, |m, x, y, _| {
        let tape = m.mlp.forward_tape(x)?;
        let (loss, g) = mse_grad(tape.output(), y);
        let grads = m.mlp.backward(&tape, g, false).0;
        Ok((loss, Fcn { mlp: grads }))
    })?;
    Ok(TrainedBaseline {
        model: BaselineModel::Fcn(model),
        history,
        steps,
    })
}

pub fn train_cnn(
    data: &BaselineDataset,
    cfg: &BaselineTrainConfig,
) -> Result<TrainedBaseline, BaselineError> {
    let mut model = initial_cnn(data.input_dim(), cfg);
    let (history, steps) = train_loop(&mut model, data, cfg, |m, x, y, rng| {
        let tape = m.forward_train(x, rng)?;
        let (loss, g) = mse_grad(tape.head.output(), y);
        Ok((loss, m.backward(&tape, g)))
    })?;
    Ok(TrainedBaseline {
        model: BaselineModel::Cnn(model),
        history,
        steps,
    })
}

pub fn train_baseline(
    kind: BaselineKind,
    data: &BaselineDataset,
    cfg: &BaselineTrainConfig,
) -> Result<TrainedBaseline, BaselineError> {
    match kind {
        BaselineKind::Fcn => train_fcn(data, cfg),
        BaselineKind::Cnn => train_cnn(data, cfg),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineEnvelope {
    pub architecture: BaselineKind,
    pub problem: ProblemId,
    pub function_id: usize,
    pub input_dim: usize,
    pub dropout: Option<f64>,
}

pub fn checkpoint_header(
    model: &BaselineModel,
    problem: ProblemId,
    function_id: usize,
    seed: u64,
    steps: u64,
) -> CheckpointHeader {
    let (networks, dropout) = match model {
        BaselineModel::Fcn(m) => (vec![NetworkSpec::of_mlp("fcn", &m.mlp)], None),
        BaselineModel::Cnn(m) => (
            vec![
                NetworkSpec::of_conv("conv", &m.conv),
                NetworkSpec::of_mlp("head", &m.head),
            ],
            Some(m.dropout.p),
        ),
    };
    let env = BaselineEnvelope {
        architecture: model.kind(),
        problem,
        function_id,
        input_dim: model.input_dim(),
        dropout,
    };
    checkpoint::header(
        model.kind().as_str(),
        networks,
        seed,
        steps,
        serde_json::to_value(env).expect("envelope serialises"),
    )
}

pub fn save_checkpoint(
    path: &Path,
    model: &BaselineModel,
    header: CheckpointHeader,
) -> Result<(), BaselineError> {
    checkpoint::write(path, header, &model.flatten())?;
    Ok(())
}

pub fn model_from_checkpoint(
    header: &CheckpointHeader,
    values: &[f64],
) -> Result<(BaselineModel, BaselineEnvelope), BaselineError> {
    let bad = |m: String| BaselineError::Nn(NnError::Checkpoint(m));
    let env: BaselineEnvelope =
        serde_json::from_value(header.envelope.clone()).map_err(|e| bad(e.to_string()))?;
    if header.model != env.architecture.as_str() {
        return Err(bad(format!(
            "architecture tag '{}' does not match envelope",
            header.model
        )));
    }
    let mut model = match (env.architecture, header.networks.as_slice()) {
        (BaselineKind::Fcn, [net]) => BaselineModel::Fcn(Fcn { mlp: net.to_mlp()? }),
        (BaselineKind::Cnn, [conv, head]) => BaselineModel::Cnn(Cnn {
            conv: conv.to_conv()?,
            head: head.to_mlp()?,
            dropout: Dropout::new(env.dropout.unwrap_or(CNN_DROPOUT)),
        }),
        _ => return Err(bad("unexpected network list".into())),
    };
    let expected = match &model {
        BaselineModel::Fcn(m) => m.num_params(),
        BaselineModel::Cnn(m) => m.num_params(),
    };
    if values.len() != expected {
        return Err(bad(format!(
            "{} values for {expected} parameters",
            values.len()
        )));
    }
    match &mut model {
        BaselineModel::Fcn(m) => m.assign(values),
        BaselineModel::Cnn(m) => m.assign(values),
    }
    Ok((model, env))
}

pub fn load_checkpoint(
    path: &Path,
) -> Result<(BaselineModel, CheckpointHeader, BaselineEnvelope), BaselineError> {
    let (header, values) = checkpoint::read(path)?;
    let (model, env) = model_from_checkpoint(&header, &values)?;
    Ok((model, header, env))
}
