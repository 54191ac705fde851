//! Experiment configuration files.
//!
//! A config is a TOML document (`*.cfg`) describing one experiment: the
//! problem, dataset sizes, network sizes, training settings, baseline and
//! sweep settings and the output directory. Every field except `problem`
//! has a per-problem default, so a file only needs to state what differs.

use std::fs;
use std::path::{Path, PathBuf};

use onet_core::baselines::{BaselineKind, BaselineTrainConfig};
use onet_core::dataset::{DatasetSpec, Layout, ProblemId};
use onet_core::deeponet::{DeepONetConfig, LossKind, TrainConfig};
use onet_core::grf::GrfConfig;
use onet_core::nn::{Activation, AdamConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemId,
    #[serde(default)]
    pub seed: u64,
    /// Where every artifact of the run is written. Not part of the hash.
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub dataset: DatasetSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub baselines: BaselineSection,
    pub sweep: SweepSection,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_bins() -> usize {
    30
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub n_train: usize,
    pub n_test: usize,
    pub n_queries: usize,
    pub layout: Layout,
    /// Input-function field; the problem default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grf: Option<GrfConfig>,
    /// Sizes used instead when running with `--full`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full: Option<FullSizes>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullSizes {
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    pub n_queries: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub branch_hidden: Vec<usize>,
    pub trunk_hidden: Vec<usize>,
    pub latent: usize,
    pub activation: Activation,
    pub trunk_output_activation: Activation,
    pub stacked: bool,
    pub output_bias: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub iterations: usize,
    pub learning_rate: f64,
    pub loss: LossKind,
    pub metric: LossKind,
    pub log_every: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    /// Training points drawn per function.
    pub n_points: usize,
    pub epochs: usize,
    pub fcn_batch: usize,
    pub cnn_batch: usize,
    pub learning_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Iteration counts at which a single long run is evaluated.
    pub iterations: Vec<usize>,
    /// Hidden width of the one-hidden-layer trunk.
    pub trunk_widths: Vec<usize>,
}

/// Partial config as written in a file: sections and fields may be omitted.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: ProblemId,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
    histogram_bins: Option<usize>,
    #[serde(default)]
    dataset: toml::Table,
    #[serde(default)]
    model: toml::Table,
    #[serde(default)]
    train: toml::Table,
    #[serde(default)]
    baselines: toml::Table,
    #[serde(default)]
    sweep: toml::Table,
}

impl ExperimentConfig {
    /// The published setting for `problem` (desk scale for diffusion).
    pub fn published(problem: ProblemId) -> Self {
        let (n_train, n_test, layout, iterations) = match problem {
            ProblemId::Ode => (150, 1000, Layout::Aligned, 10_000),
            ProblemId::Diffusion => (1000, 1000, Layout::Unaligned, 10_000),
            ProblemId::Burgers => (150, 1000, Layout::Aligned, 50_000),
        };
        let full = (problem == ProblemId::Diffusion).then_some(FullSizes {
            n_train: Some(10_000),
            n_test: None,
            n_queries: None,
        });
        Self {
            problem,
            seed: 0,
            out_dir: PathBuf::from(format!("runs/{problem}")),
            dataset: DatasetSection {
                n_train,
                n_test,
                n_queries: 100,
                layout,
                grf: None,
                full,
            },
            model: ModelSection {
                branch_hidden: vec![40],
                trunk_hidden: vec![40],
                latent: 40,
                activation: Activation::Relu,
                trunk_output_activation: Activation::Relu,
                stacked: false,
                output_bias: false,
            },
            train: TrainSection {
                iterations,
                learning_rate: 1e-3,
                loss: LossKind::Mse,
                metric: LossKind::MeanL2Relative,
                log_every: 100,
            },
            baselines: BaselineSection {
                n_points: problem.baseline_points(),
                epochs: 2000,
                fcn_batch: 10,
                cnn_batch: 20,
                learning_rate: 1e-3,
            },
            sweep: SweepSection {
                iterations: vec![10_000, 20_000, 50_000, 100_000],
                trunk_widths: vec![20, 40, 60, 80],
            },
            histogram_bins: default_bins(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
        let mut cfg = Self::published(raw.problem);
        cfg.seed = raw.seed.unwrap_or(cfg.seed);
        cfg.out_dir = raw.out_dir.unwrap_or(cfg.out_dir);
        cfg.histogram_bins = raw.histogram_bins.unwrap_or(cfg.histogram_bins);
        cfg.dataset = merge(&cfg.dataset, raw.dataset, "dataset")?;
        cfg.model = merge(&cfg.model, raw.model, "model")?;
        cfg.train = merge(&cfg.train, raw.train, "train")?;
        cfg.baselines = merge(&cfg.baselines, raw.baselines, "baselines")?;
        cfg.sweep = merge(&cfg.sweep, raw.sweep, "sweep")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises to TOML")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Usage(m.to_string()));
        if self.dataset.n_train == 0 || self.dataset.n_queries == 0 {
            return bad("dataset needs at least one training function and one query");
        }
        if self.model.latent == 0
            || self.model.branch_hidden.contains(&0)
            || self.model.trunk_hidden.contains(&0)
        {
            return bad("layer widths must be positive");
        }
        if self.train.log_every == 0 {
            return bad("log_every must be positive");
        }
        if self.train.learning_rate <= 0.0 || self.baselines.learning_rate <= 0.0 {
            return bad("learning rates must be positive");
        }
        if self.baselines.fcn_batch == 0 || self.baselines.cnn_batch == 0 {
            return bad("batch sizes must be positive");
        }
        if self.histogram_bins == 0 {
            return bad("histogram_bins must be positive");
        }
        Ok(())
    }

    /// Replace the dataset sizes by the `full` ones.
    pub fn apply_full(&mut self) {
        if let Some(full) = self.dataset.full.take() {
            self.dataset.n_train = full.n_train.unwrap_or(self.dataset.n_train);
            self.dataset.n_test = full.n_test.unwrap_or(self.dataset.n_test);
            self.dataset.n_queries = full.n_queries.unwrap_or(self.dataset.n_queries);
        }
    }

    /// Hex SHA-256 of the canonical JSON form of everything that affects
    /// results (the output directory excluded).
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serialises");
        v.as_object_mut()
            .expect("config is an object")
            .remove("out_dir");
        let digest = Sha256::digest(serde_json::to_vec(&v).expect("value serialises"));
        hex::encode(&digest[..8])
    }

    pub fn grf(&self) -> GrfConfig {
        self.dataset
            .grf
            .clone()
            .unwrap_or_else(|| self.problem.default_grf())
    }

    pub fn dataset_spec(&self) -> DatasetSpec {
        DatasetSpec {
            grf: self.grf(),
            ..DatasetSpec::with_defaults(
                self.problem,
                self.dataset.layout,
                self.dataset.n_train,
                self.dataset.n_test,
                self.dataset.n_queries,
                self.seed,
            )
        }
    }

    pub fn architecture(&self) -> DeepONetConfig {
        self.architecture_with_trunk(&self.model.trunk_hidden)
    }

    pub fn architecture_with_trunk(&self, trunk_hidden: &[usize]) -> DeepONetConfig {
        let m = &self.model;
        let layers = |first: usize, hidden: &[usize]| -> Vec<usize> {
            std::iter::once(first)
                .chain(hidden.iter().copied())
                .chain([m.latent])
                .collect()
        };
        let query_dim = self.problem.default_config().query_dim();
        DeepONetConfig {
            branch: layers(self.grf().n_sensors, &m.branch_hidden),
            trunk: layers(query_dim, trunk_hidden),
            activation: m.activation,
            trunk_output_activation: m.trunk_output_activation,
            stacked: m.stacked,
            output_bias: m.output_bias,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            iterations: self.train.iterations,
            adam: AdamConfig {
                lr: self.train.learning_rate,
                ..AdamConfig::default()
            },
            loss: self.train.loss,
            metric: self.train.metric,
            log_every: self.train.log_every,
            seed: self.seed,
        }
    }

    pub fn baseline_config(&self, kind: BaselineKind) -> BaselineTrainConfig {
        let b = &self.baselines;
        BaselineTrainConfig {
            epochs: b.epochs,
            batch_size: match kind {
                BaselineKind::Fcn => b.fcn_batch,
                BaselineKind::Cnn => b.cnn_batch,
            },
            adam: AdamConfig {
                lr: b.learning_rate,
                ..AdamConfig::default()
            },
            seed: self.seed,
        }
    }
}

/// Overlay the keys given in a file section on the defaults.
fn merge<T>(defaults: &T, section: toml::Table, name: &str) -> Result<T, CliError>
where
    T: Serialize + for<'de> Deserialize<'de>,
{
    let mut base = toml::Table::try_from(defaults).expect("section serialises");
    for (k, v) in section {
        base.insert(k, v);
    }
    base.try_into()
        .map_err(|e| CliError::Usage(format!("invalid [{name}] section: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gives_published_defaults() {
        let cfg = ExperimentConfig::from_toml("problem = \"ode\"\n").unwrap();
        assert_eq!(cfg, ExperimentConfig::published(ProblemId::Ode));
        assert_eq!(cfg.architecture().branch, vec![100, 40, 40]);
        assert_eq!(cfg.architecture().trunk, vec![1, 40, 40]);
    }

    #[test]
    fn sections_override_single_fields() {
        let cfg = ExperimentConfig::from_toml("problem = \"burgers\"\nseed = 7\n[train]\niterations = 5\n[model]\ntrunk_hidden = [20]\n").unwrap();
        assert_eq!(cfg.train.iterations, 5);
        assert_eq!(cfg.train.log_every, 100);
        assert_eq!(cfg.architecture().trunk, vec![2, 20, 40]);
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn unknown_keys_are_usage_errors() {
        assert!(matches!(
            ExperimentConfig::from_toml("problem = \"ode\"\n[train]\niters = 3\n"),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_toml("problem = \"heat\"\n"),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn hash_ignores_output_directory_only() {
        let a = ExperimentConfig::published(ProblemId::Ode);
        let mut b = a.clone();
        b.out_dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = ExperimentConfig::published(ProblemId::Burgers);
        cfg.dataset.grf = Some(GrfConfig::periodic_ten());
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn full_switch_scales_diffusion_data() {
        let mut cfg = ExperimentConfig::published(ProblemId::Diffusion);
        let desk = cfg.hash();
        cfg.apply_full();
        assert_eq!(cfg.dataset.n_train * cfg.dataset.n_queries, 1_000_000);
        assert_ne!(cfg.hash(), desk);
    }
}
