use serde::{Deserialize, Serialize};

use super::loss::{loss_value, LossKind};
use super::model::{DeepONet, DeepONetConfig, OperatorBatch};
use super::DeepONetError;
use crate::dataset::OperatorDataset;
use crate::nn::{AdamConfig, AdamState};
use crate::rng::{seeded, tagged_seed};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: usize,
    pub adam: AdamConfig,
    /// Objective minimised on the training set.
    pub loss: LossKind,
    /// Metric reported on the test set alongside the test loss.
    pub metric: LossKind,
    pub log_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            adam: AdamConfig::default(),
            loss: LossKind::Mse,
            metric: LossKind::MeanL2Relative,
            log_every: 100,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub train_loss: f64,
    /// `NaN` when no test set was given.
    pub test_loss: f64,
    pub test_metric: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    /// State before the first update.
    pub initial: Option<HistoryRow>,
    /// One row per logging interval.
    pub rows: Vec<HistoryRow>,
}

impl TrainingHistory {
    pub fn at(&self, iteration: usize) -> Option<&HistoryRow> {
        if iteration == 0 {
            return self.initial.as_ref();
        }
        self.rows.iter().find(|r| r.iteration == iteration)
    }

    pub fn last(&self) -> Option<&HistoryRow> {
        self.rows.last().or(self.initial.as_ref())
    }
}

/// Full-batch Adam training that can be advanced in stages.
pub struct Trainer {
    pub model: DeepONet,
    pub optimizer: AdamState,
    pub history: TrainingHistory,
    pub config: TrainConfig,
    train: OperatorBatch,
    test: Option<OperatorBatch>,
    iteration: usize,
}

impl Trainer {
    /// Glorot-initialised model seeded from `config.seed`.
    pub fn new(
        train: &OperatorDataset,
        test: Option<&OperatorDataset>,
        arch: DeepONetConfig,
        config: TrainConfig,
    ) -> Result<Self, DeepONetError> {
        let model = DeepONet::new(arch, &mut seeded(tagged_seed(config.seed, "deeponet-init")))?;
        Self::from_model(model, train, test, config)
    }

    pub fn from_model(
        model: DeepONet,
        train: &OperatorDataset,
        test: Option<&OperatorDataset>,
        config: TrainConfig,
    ) -> Result<Self, DeepONetError> {
        if train.n_functions() == 0 {
            return Err(DeepONetError::EmptyInput);
        }
        if train.query_dim() != model.query_dim() || train.inputs.sensors.len() != model.n_sensors()
        {
            return Err(DeepONetError::Shape(
                "dataset does not match the network input widths".into(),
            ));
        }
        let optimizer = AdamState::for_params(config.adam, &model);
        Ok(Self {
            model,
            optimizer,
            history: TrainingHistory::default(),
            config,
            train: OperatorBatch::from_dataset(train),
            test: test
                .filter(|t| t.n_functions() > 0)
                .map(OperatorBatch::from_dataset),
            iteration: 0,
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    fn log_row(&self, train_loss: f64) -> Result<HistoryRow, DeepONetError> {
        let (test_loss, test_metric) = match &self.test {
            Some(t) => {
                let pred = self.model.predict_batch(t)?;
                (
                    loss_value(self.config.loss, pred.view(), t.targets.view())?,
                    loss_value(self.config.metric, pred.view(), t.targets.view())?,
                )
            }
            None => (f64::NAN, f64::NAN),
        };
        Ok(HistoryRow {
            iteration: self.iteration,
            train_loss,
            test_loss,
            test_metric,
        })
    }

    /// Advance until `target` updates have been applied in total.
    pub fn run_until(&mut self, target: usize) -> Result<(), DeepONetError> {
        if self.history.initial.is_none() {
            let pred = self.model.predict_batch(&self.train)?;
            let loss = loss_value(self.config.loss, pred.view(), self.train.targets.view())?;
            self.history.initial = Some(self.log_row(loss)?);
        }
        while self.iteration < target {
            let (loss, grads) = match self.model.loss_and_gradients(&self.train, self.config.loss) {
                Ok(v) => v,
                Err(DeepONetError::Nn(_)) => (f64::NAN, self.model.clone()),
                Err(e) => return Err(e),
            };
            if !loss.is_finite() {
                return Err(self.diverged());
            }
            self.optimizer.step(&mut self.model, &grads)?;
            self.iteration += 1;
            let at_log = self.config.log_every > 0 && self.iteration % self.config.log_every == 0;
            if at_log || self.iteration == self.config.iterations.max(target) {
                // Logged loss is evaluated after the update.
                let pred = self.model.predict_batch(&self.train)?;
                let loss = loss_value(self.config.loss, pred.view(), self.train.targets.view())?;
                if !loss.is_finite() {
                    return Err(self.diverged());
                }
                if self.history.rows.last().map(|r| r.iteration) != Some(self.iteration) {
                    let row = self.log_row(loss)?;
                    self.history.rows.push(row);
                }
            }
        }
        Ok(())
    }

    fn diverged(&self) -> DeepONetError {
        DeepONetError::Divergence {
            iteration: self.iteration,
            history: Box::new(self.history.clone()),
        }
    }

    pub fn run(&mut self) -> Result<(), DeepONetError> {
        self.run_until(self.config.iterations)
    }
}

pub struct TrainedDeepONet {
    pub model: DeepONet,
    pub history: TrainingHistory,
    pub steps: u64,
}

/// Train a fresh network on `train`, logging test loss and metric on `test`.
pub fn train_deeponet(
    train: &OperatorDataset,
    test: Option<&OperatorDataset>,
    arch: DeepONetConfig,
    config: TrainConfig,
) -> Result<TrainedDeepONet, DeepONetError> {
    let mut trainer = Trainer::new(train, test, arch, config)?;
    trainer.run()?;
    Ok(TrainedDeepONet {
        steps: trainer.optimizer.step_count,
        model: trainer.model,
        history: trainer.history,
    })
}
