//! Branch/trunk operator networks.
//!
//! A [`DeepONet`] predicts `G(u)(P) = sum_k b_k(u) t_k(P)`, where the branch
//! network `b` reads the input function at the sensors and the trunk network
//! `t` reads the query point. Training is full-batch Adam over every
//! `(function, query)` pair of a dataset.

mod loss;
mod model;
mod train;

pub use loss::{loss_and_grad, loss_mean_l2_relative, loss_mse, loss_value, LossKind};
pub use model::{Branch, DeepONet, DeepONetConfig, ForwardCache, OperatorBatch};
pub use train::{
    train_deeponet, HistoryRow, TrainConfig, TrainedDeepONet, Trainer, TrainingHistory,
};

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::ProblemId;
use crate::nn::checkpoint::{self, CheckpointHeader, NetworkSpec};
use crate::nn::{NnError, Params};

#[derive(Debug, Error)]
pub enum DeepONetError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty input")]
    EmptyInput,
    #[error("target group {group} has zero norm")]
    DegenerateTarget { group: usize },
    #[error("training diverged at iteration {iteration}")]
    Divergence {
        iteration: usize,
        history: Box<TrainingHistory>,
    },
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Model-specific checkpoint metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeepONetEnvelope {
    pub config: DeepONetConfig,
    pub latent_dim: usize,
    pub stacked: bool,
    pub problem: Option<ProblemId>,
    pub history: Option<TrainingHistory>,
}

pub const CHECKPOINT_MODEL: &str = "deeponet";

pub fn checkpoint_header(
    model: &DeepONet,
    problem: Option<ProblemId>,
    seed: u64,
    steps: u64,
    history: Option<&TrainingHistory>,
) -> CheckpointHeader {
    let mut networks: Vec<NetworkSpec> = model
        .branch_networks()
        .iter()
        .enumerate()
        .map(|(k, m)| NetworkSpec::of_mlp(&format!("branch_{k}"), m))
        .collect();
    networks.push(NetworkSpec::of_mlp("trunk", &model.trunk));
    let envelope = DeepONetEnvelope {
        config: model.config.clone(),
        latent_dim: model.latent_dim(),
        stacked: model.config.stacked,
        problem,
        history: history.cloned(),
    };
    checkpoint::header(
        CHECKPOINT_MODEL,
        networks,
        seed,
        steps,
        serde_json::to_value(envelope).expect("envelope serialises"),
    )
}

pub fn save_checkpoint(
    path: &Path,
    model: &DeepONet,
    header: CheckpointHeader,
) -> Result<(), DeepONetError> {
    checkpoint::write(path, header, &model.flatten())?;
    Ok(())
}

pub fn model_from_checkpoint(
    header: &CheckpointHeader,
    values: &[f64],
) -> Result<(DeepONet, DeepONetEnvelope), DeepONetError> {
    let bad = |m: String| DeepONetError::Nn(NnError::Checkpoint(m));
    if header.model != CHECKPOINT_MODEL {
        return Err(bad(format!(
            "expected a {CHECKPOINT_MODEL} checkpoint, found '{}'",
            header.model
        )));
    }
    let env: DeepONetEnvelope =
        serde_json::from_value(header.envelope.clone()).map_err(|e| bad(e.to_string()))?;
    let (trunk_spec, branch_specs) = header
        .networks
        .split_last()
        .ok_or_else(|| bad("no networks".into()))?;
    let branches = branch_specs
        .iter()
        .map(|s| s.to_mlp())
        .collect::<Result<Vec<_>, _>>()?;
    let branch = if env.config.stacked {
        Branch::Stacked(branches)
    } else {
        let [single]: [_; 1] = branches
            .try_into()
            .map_err(|_| bad("unstacked model needs one branch".into()))?;
        Branch::Unstacked(single)
    };
    let bias = vec![0.0; usize::from(env.config.output_bias)];
    let mut model = DeepONet::from_parts(env.config.clone(), branch, trunk_spec.to_mlp()?, bias)?;
    if values.len() != model.num_params() {
        return Err(bad(format!(
            "{} values for {} parameters",
            values.len(),
            model.num_params()
        )));
    }
    model.assign(values);
    Ok((model, env))
}

pub fn load_checkpoint(
    path: &Path,
) -> Result<(DeepONet, CheckpointHeader, DeepONetEnvelope), DeepONetError> {
    let (header, values) = checkpoint::read(path)?;
    let (model, env) = model_from_checkpoint(&header, &values)?;
    Ok((model, header, env))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::build_ode_dataset;
    use crate::nn::Activation;
    use crate::rng::seeded;
    use ndarray::{array, Array2};

    fn small(stacked: bool, bias: bool) -> DeepONet {
        let cfg = DeepONetConfig {
            branch: vec![4, 6, 3],
            trunk: vec![2, 5, 3],
            stacked,
            output_bias: bias,
            ..DeepONetConfig::standard(4, 2)
        };
        let mut m = DeepONet::new(cfg, &mut seeded(3)).unwrap();
        m.bias.iter_mut().for_each(|b| *b = 0.25);
        m
    }

    #[test]
    fn zero_trunk_annihilates_prediction() {
        let mut m = small(false, false);
        let last = m.trunk.layers_mut().last_mut().unwrap();
        last.weights.fill(0.0);
        last.bias.fill(0.0);
        for seed in 0..5u64 {
            let u: Vec<f64> = (0..4).map(|i| (seed as f64 + i as f64).sin()).collect();
            assert_eq!(m.forward(&u, &[0.3, 0.7]).unwrap(), 0.0);
        }
    }

    #[test]
    fn scalar_latent_is_a_product() {
        let cfg = DeepONetConfig {
            branch: vec![2, 1],
            trunk: vec![1, 1],
            activation: Activation::Identity,
            trunk_output_activation: Activation::Identity,
            stacked: false,
            output_bias: false,
        };
        let mut m = DeepONet::new(cfg, &mut seeded(0)).unwrap();
        let Branch::Unstacked(b) = &mut m.branch else {
            unreachable!()
        };
        b.layers_mut()[0].weights.fill(0.0);
        b.layers_mut()[0].bias.fill(3.0);
        m.trunk.layers_mut()[0].weights.fill(0.0);
        m.trunk.layers_mut()[0].bias.fill(-1.5);
        assert_eq!(m.forward(&[0.1, 0.2], &[4.0]).unwrap(), -4.5);
    }

    #[test]
    fn batch_paths_agree_with_pointwise_forward() {
        for (stacked, bias) in [(false, false), (true, false), (false, true)] {
            let m = small(stacked, bias);
            let inputs = Array2::from_shape_fn((3, 4), |(i, j)| ((i * 4 + j) as f64 * 0.37).sin());
            let points =
                Array2::from_shape_fn((5, 2), |(i, j)| (i as f64 * 0.2 + j as f64 * 0.1).cos());
            let pred = m.predict(inputs.view(), points.view()).unwrap();
            let gather = OperatorBatch {
                inputs: inputs.clone(),
                points: points.clone(),
                pair_index: Some(array![[0, 4], [2, 2], [1, 3]]),
                targets: Array2::zeros((3, 2)),
            };
            let gp = m.predict_batch(&gather).unwrap();
            for i in 0..3 {
                for k in 0..5 {
                    let single = m
                        .forward(
                            inputs.row(i).as_slice().unwrap(),
                            points.row(k).as_slice().unwrap(),
                        )
                        .unwrap();
                    assert!((pred[[i, k]] - single).abs() <= 1e-12);
                }
            }
            assert_eq!(gp[[0, 1]], pred[[0, 4]]);
            assert_eq!(gp[[2, 0]], pred[[2, 1]]);
        }
    }

    #[test]
    fn dimension_errors() {
        let m = small(false, false);
        assert!(matches!(
            m.forward(&[0.0; 3], &[0.0, 0.0]),
            Err(DeepONetError::Shape(_))
        ));
        assert!(matches!(
            m.forward(&[0.0; 4], &[0.0]),
            Err(DeepONetError::Shape(_))
        ));
        let bad = DeepONetConfig {
            trunk: vec![2, 5, 4],
            ..DeepONetConfig::standard(4, 2)
        };
        assert!(DeepONet::new(bad, &mut seeded(0)).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        for (stacked, bias) in [(false, false), (true, true)] {
            let m = small(stacked, bias);
            let h = checkpoint_header(&m, Some(ProblemId::Burgers), 9, 12, None);
            let bytes = checkpoint::encode(h, &m.flatten()).unwrap();
            let (h, v) = checkpoint::decode(&bytes).unwrap();
            let (back, env) = model_from_checkpoint(&h, &v).unwrap();
            assert_eq!(back, m);
            assert_eq!(env.problem, Some(ProblemId::Burgers));
            assert_eq!(env.latent_dim, 3);
        }
    }

    #[test]
    fn zero_iterations_keep_initialisation() {
        let (train, test) = build_ode_dataset(5, 3, 20, 1).unwrap();
        let arch = DeepONetConfig::standard(100, 1);
        let cfg = TrainConfig {
            iterations: 0,
            seed: 4,
            ..TrainConfig::default()
        };
        let init = DeepONet::new(
            arch.clone(),
            &mut seeded(crate::rng::tagged_seed(4, "deeponet-init")),
        )
        .unwrap();
        let trained = train_deeponet(&train, Some(&test), arch, cfg).unwrap();
        assert_eq!(trained.model, init);
        assert!(trained.history.rows.is_empty());
        assert!(trained.history.initial.is_some());
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let (train, test) = build_ode_dataset(20, 10, 30, 2).unwrap();
        let cfg = TrainConfig {
            iterations: 300,
            seed: 1,
            ..TrainConfig::default()
        };
        let a = train_deeponet(
            &train,
            Some(&test),
            DeepONetConfig::standard(100, 1),
            cfg.clone(),
        )
        .unwrap();
        let b = train_deeponet(&train, Some(&test), DeepONetConfig::standard(100, 1), cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.history, b.history);
        assert_eq!(a.history.rows.len(), 3);
        assert!(a.history.rows[2].train_loss < a.history.initial.unwrap().train_loss);
        assert_eq!(a.steps, 300);
    }

    #[test]
    fn divergence_reports_iteration_and_history() {
        let (train, _) = build_ode_dataset(4, 1, 10, 2).unwrap();
        let mut model = DeepONet::new(DeepONetConfig::standard(100, 1), &mut seeded(0)).unwrap();
        let Branch::Unstacked(b) = &mut model.branch else {
            unreachable!()
        };
        b.layers_mut()[0].weights[[0, 0]] = f64::NAN;
        let mut t = Trainer::from_model(model, &train, None, TrainConfig::default()).unwrap();
        match t.run_until(5) {
            Err(DeepONetError::Divergence { iteration, history }) => {
                assert_eq!(iteration, 0);
                assert!(history.rows.is_empty());
            }
            other => panic!("expected divergence, got {:?}", other.err()),
        }
    }
}
