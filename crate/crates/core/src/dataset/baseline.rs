use ndarray::Array2;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{DatasetError, OperatorDataset, ProblemId};
use crate::rng::seeded;

/// Point data for a single input function: training pairs resampled from
/// the solver grid and the function's original query pairs as test set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineDataset {
    pub problem: ProblemId,
    pub source_function_id: usize,
    pub train_points: Array2<f64>,
    pub train_targets: Vec<f64>,
    pub test_points: Array2<f64>,
    pub test_targets: Vec<f64>,
}

impl BaselineDataset {
    pub fn input_dim(&self) -> usize {
        self.train_points.ncols()
    }

    pub fn n_train(&self) -> usize {
        self.train_targets.len()
    }

    pub fn n_test(&self) -> usize {
        self.test_targets.len()
    }
}

/// Re-solve function `function_id` and draw `n_train_points` grid nodes that
/// are not among its query points.
pub fn resample_for_baseline(
    dataset: &OperatorDataset,
    function_id: usize,
    n_train_points: usize,
    seed: u64,
) -> Result<BaselineDataset, DatasetError> {
    if function_id >= dataset.n_functions() {
        return Err(DatasetError::Invalid(format!(
            "function {function_id} out of range ({} functions)",
            dataset.n_functions()
        )));
    }
    let grid = dataset.resolve(function_id)?;
    let queries = dataset.queries(function_id);
    let mut excluded = vec![false; grid.len()];
    for p in queries.rows() {
        let node = grid
            .locate(&p.to_vec())
            .ok_or_else(|| DatasetError::Invalid(format!("query {p} is not a grid node")))?;
        excluded[node] = true;
    }
    let candidates: Vec<usize> = (0..grid.len()).filter(|&k| !excluded[k]).collect();
    if n_train_points > candidates.len() {
        return Err(DatasetError::Capacity {
            needed: n_train_points,
            available: candidates.len(),
        });
    }
    let mut picked: Vec<usize> = sample(&mut seeded(seed), candidates.len(), n_train_points)
        .into_iter()
        .map(|k| candidates[k])
        .collect();
    picked.sort_unstable();

    let dim = grid.coords.ncols();
    let train_points =
        Array2::from_shape_fn((picked.len(), dim), |(r, c)| grid.coords[[picked[r], c]]);
    let train_targets = picked.iter().map(|&k| grid.values[k]).collect();
    Ok(BaselineDataset {
        problem: dataset.problem(),
        source_function_id: function_id,
        train_points,
        train_targets,
        test_points: queries.to_owned(),
        test_targets: dataset.targets_of(function_id).to_vec(),
    })
}
