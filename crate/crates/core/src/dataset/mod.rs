//! Operator-learning datasets: `(u, P, s(P))` triples in aligned or
//! unaligned layout, the per-function resampling used by the baselines,
//! and the `.opds` on-disk container.

mod baseline;
mod io;
mod problem;

pub use baseline::{resample_for_baseline, BaselineDataset};
pub use io::{load_dataset, read_manifest, save_dataset, save_dataset_tagged, BlobInfo, Manifest};
pub use problem::{ProblemConfig, ProblemId, SolutionGrid};

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grf::{sample_functions, GrfConfig, GrfError, InputFunctionSet};
use crate::rng::{child_seed, seeded, tagged_seed};
use crate::solvers::SolverError;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Grf(#[from] GrfError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed manifest: {0}")]
    Manifest(String),
    #[error("blob {blob} truncated: expected {expected} bytes, found {actual}")]
    Truncated {
        blob: String,
        expected: usize,
        actual: usize,
    },
    #[error("checksum mismatch in blob {blob}")]
    Checksum { blob: String },
    #[error("not enough grid points: need {needed}, {available} available")]
    Capacity { needed: usize, available: usize },
    #[error("invalid dataset: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// All functions share one query list.
    Aligned,
    /// Each function has its own query list.
    Unaligned,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub problem: ProblemConfig,
    pub split: Split,
    pub master_seed: u64,
    pub function_seed: u64,
    pub query_seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorDataset {
    pub inputs: InputFunctionSet,
    pub layout: Layout,
    /// One `n_queries x query_dim` matrix when aligned, one per function
    /// when unaligned.
    pub points: Vec<Array2<f64>>,
    /// `n_functions x n_queries`.
    pub targets: Array2<f64>,
    pub provenance: Provenance,
}

impl OperatorDataset {
    pub fn n_functions(&self) -> usize {
        self.inputs.len()
    }

    pub fn n_queries(&self) -> usize {
        self.targets.ncols()
    }

    pub fn query_dim(&self) -> usize {
        self.provenance.problem.query_dim()
    }

    pub fn problem(&self) -> ProblemId {
        self.provenance.problem.id()
    }

    pub fn n_points(&self) -> usize {
        self.targets.len()
    }

    /// Query points of function `i`.
    pub fn queries(&self, i: usize) -> ArrayView2<'_, f64> {
        match self.layout {
            Layout::Aligned => self.points[0].view(),
            Layout::Unaligned => self.points[i].view(),
        }
    }

    pub fn targets_of(&self, i: usize) -> &[f64] {
        self.targets
            .row(i)
            .to_slice()
            .expect("targets are contiguous")
    }

    /// Checks structural invariants: counts agree, targets are finite and the
    /// layout flag matches the query data.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let n = self.n_functions();
        if self.targets.nrows() != n {
            return Err(DatasetError::Invalid(format!(
                "{} target rows for {n} functions",
                self.targets.nrows()
            )));
        }
        let expected_lists = match self.layout {
            Layout::Aligned => 1,
            Layout::Unaligned => n,
        };
        if self.points.len() != expected_lists {
            return Err(DatasetError::Invalid(format!(
                "{:?} layout needs {expected_lists} query lists, found {}",
                self.layout,
                self.points.len()
            )));
        }
        for p in &self.points {
            if p.dim() != (self.n_queries(), self.query_dim()) {
                return Err(DatasetError::Invalid(format!(
                    "query list of shape {:?}",
                    p.dim()
                )));
            }
        }
        if !self.targets.iter().all(|v| v.is_finite()) {
            return Err(DatasetError::Invalid("non-finite target".into()));
        }
        if self.layout == Layout::Unaligned
            && n >= 2
            && self.points.windows(2).all(|w| w[0] == w[1])
        {
            return Err(DatasetError::Invalid(
                "flagged unaligned but every function shares its queries".into(),
            ));
        }
        Ok(())
    }

    /// Solve function `i` again and return its full solution grid.
    pub fn resolve(&self, i: usize) -> Result<SolutionGrid, DatasetError> {
        Ok(self
            .provenance
            .problem
            .solve(self.inputs.row(i), &self.inputs.sensors)?)
    }
}

/// Everything that determines a train/test pair of datasets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub problem: ProblemConfig,
    pub grf: GrfConfig,
    pub n_train: usize,
    pub n_test: usize,
    pub n_queries: usize,
    pub layout: Layout,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn ode(n_train: usize, n_test: usize, n_queries: usize, seed: u64) -> Self {
        Self::with_defaults(
            ProblemId::Ode,
            Layout::Aligned,
            n_train,
            n_test,
            n_queries,
            seed,
        )
    }

    pub fn diffusion(n_train: usize, n_test: usize, n_queries: usize, seed: u64) -> Self {
        Self::with_defaults(
            ProblemId::Diffusion,
            Layout::Unaligned,
            n_train,
            n_test,
            n_queries,
            seed,
        )
    }

    pub fn burgers(n_train: usize, n_test: usize, n_queries: usize, seed: u64) -> Self {
        Self::with_defaults(
            ProblemId::Burgers,
            Layout::Aligned,
            n_train,
            n_test,
            n_queries,
            seed,
        )
    }

    pub fn with_defaults(
        problem: ProblemId,
        layout: Layout,
        n_train: usize,
        n_test: usize,
        n_queries: usize,
        seed: u64,
    ) -> Self {
        Self {
            problem: problem.default_config(),
            grf: problem.default_grf(),
            n_train,
            n_test,
            n_queries,
            layout,
            seed,
        }
    }
}

pub fn build_ode_dataset(
    n_train: usize,
    n_test: usize,
    n_queries: usize,
    seed: u64,
) -> Result<(OperatorDataset, OperatorDataset), DatasetError> {
    build_datasets(&DatasetSpec::ode(n_train, n_test, n_queries, seed))
}

pub fn build_diffusion_dataset(
    n_train: usize,
    n_test: usize,
    n_queries: usize,
    seed: u64,
) -> Result<(OperatorDataset, OperatorDataset), DatasetError> {
    build_datasets(&DatasetSpec::diffusion(n_train, n_test, n_queries, seed))
}

pub fn build_burgers_dataset(
    n_train: usize,
    n_test: usize,
    n_queries: usize,
    seed: u64,
) -> Result<(OperatorDataset, OperatorDataset), DatasetError> {
    build_datasets(&DatasetSpec::burgers(n_train, n_test, n_queries, seed))
}

/// Generate the train and test sets. Aligned layouts draw one query list,
/// shared by both splits; unaligned layouts draw per function. Query points
/// are grid nodes sampled without replacement.
pub fn build_datasets(
    spec: &DatasetSpec,
) -> Result<(OperatorDataset, OperatorDataset), DatasetError> {
    let aligned_seed = tagged_seed(spec.seed, "aligned-queries");
    let train = build_split(spec, Split::Train, aligned_seed)?;
    let test = build_split(spec, Split::Test, aligned_seed)?;
    Ok((train, test))
}

fn build_split(
    spec: &DatasetSpec,
    split: Split,
    aligned_seed: u64,
) -> Result<OperatorDataset, DatasetError> {
    let (n, tag) = match split {
        Split::Train => (spec.n_train, "train"),
        Split::Test => (spec.n_test, "test"),
    };
    let function_seed = tagged_seed(spec.seed, &format!("{tag}-functions"));
    let query_seed = match spec.layout {
        Layout::Aligned => aligned_seed,
        Layout::Unaligned => tagged_seed(spec.seed, &format!("{tag}-queries")),
    };
    let inputs = sample_functions(&spec.grf, n, function_seed)?;
    let dim = spec.problem.query_dim();

    let solved: Vec<SolutionGrid> = (0..n)
        .into_par_iter()
        .map(|i| spec.problem.solve(inputs.row(i), &inputs.sensors))
        .collect::<Result<_, _>>()?;

    // Coordinates do not depend on the input function; an empty split still
    // needs them for its aligned query list.
    let probe;
    let template = match solved.first() {
        Some(g) => g,
        None => {
            probe = spec
                .problem
                .solve(&vec![0.0; inputs.sensors.len()], &inputs.sensors)?;
            &probe
        }
    };
    let n_nodes = template.len();
    if spec.n_queries > n_nodes {
        return Err(DatasetError::Capacity {
            needed: spec.n_queries,
            available: n_nodes,
        });
    }
    let draw = |seed: u64| {
        let mut idx =
            rand::seq::index::sample(&mut seeded(seed), n_nodes, spec.n_queries).into_vec();
        idx.sort_unstable();
        idx
    };
    let node_lists: Vec<Vec<usize>> = match spec.layout {
        Layout::Aligned => vec![draw(query_seed)],
        Layout::Unaligned => (0..n)
            .map(|i| draw(child_seed(query_seed, i as u64)))
            .collect(),
    };
    let points: Vec<Array2<f64>> = node_lists
        .iter()
        .map(|nodes| {
            Array2::from_shape_fn((nodes.len(), dim), |(r, c)| template.coords[[nodes[r], c]])
        })
        .collect();
    let mut targets = Array2::zeros((n, spec.n_queries));
    for (i, grid) in solved.iter().enumerate() {
        let nodes = match spec.layout {
            Layout::Aligned => &node_lists[0],
            Layout::Unaligned => &node_lists[i],
        };
        for (q, &node) in nodes.iter().enumerate() {
            targets[[i, q]] = grid.values[node];
        }
    }

    let ds = OperatorDataset {
        inputs,
        layout: spec.layout,
        points,
        targets,
        provenance: Provenance {
            problem: spec.problem.clone(),
            split,
            master_seed: spec.seed,
            function_seed,
            query_seed,
        },
    };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ode_dataset_is_aligned_and_sized() {
        let (train, test) = build_ode_dataset(6, 4, 100, 1).unwrap();
        assert_eq!(train.targets.dim(), (6, 100));
        assert_eq!(test.targets.dim(), (4, 100));
        assert_eq!(train.layout, Layout::Aligned);
        assert_eq!(train.queries(0), train.queries(5));
        assert_eq!(train.queries(0), test.queries(0));
        assert_eq!(train.query_dim(), 1);
    }

    #[test]
    fn ode_targets_match_independent_resolve() {
        let (train, _) = build_ode_dataset(3, 1, 100, 2).unwrap();
        for i in 0..3 {
            let grid = train.resolve(i).unwrap();
            for (q, p) in train.queries(i).rows().into_iter().enumerate() {
                let node = grid.locate(p.as_slice().unwrap()).unwrap();
                assert!((grid.values[node] - train.targets[[i, q]]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn unaligned_queries_differ_between_functions() {
        let spec = DatasetSpec {
            problem: ProblemConfig::Diffusion(Default::default()),
            ..DatasetSpec::diffusion(3, 2, 100, 5)
        };
        let (train, _) = build_datasets(&spec).unwrap();
        assert_eq!(train.layout, Layout::Unaligned);
        assert_ne!(train.queries(0), train.queries(1));
        assert_eq!(train.n_points(), 300);
        train.validate().unwrap();
    }

    #[test]
    fn generation_is_deterministic() {
        let a = build_ode_dataset(3, 2, 20, 9).unwrap();
        let b = build_ode_dataset(3, 2, 20, 9).unwrap();
        assert_eq!(a, b);
        let c = build_ode_dataset(3, 2, 20, 10).unwrap();
        assert_ne!(a.0.targets, c.0.targets);
    }

    #[test]
    fn empty_splits_are_valid() {
        let (train, test) = build_ode_dataset(0, 2, 10, 3).unwrap();
        assert_eq!(train.n_functions(), 0);
        assert_eq!(train.points[0], test.points[0]);
    }

    #[test]
    fn too_many_queries_is_capacity_error() {
        let err = build_ode_dataset(1, 1, 5000, 3).unwrap_err();
        assert!(matches!(
            err,
            DatasetError::Capacity {
                needed: 5000,
                available: 1001
            }
        ));
    }

    #[test]
    fn layout_flag_checked_against_data() {
        let (mut train, _) = build_ode_dataset(3, 1, 10, 4).unwrap();
        train.layout = Layout::Unaligned;
        assert!(train.validate().is_err());
        train.points = vec![train.points[0].clone(); 3];
        assert!(train.validate().is_err());
    }
}
