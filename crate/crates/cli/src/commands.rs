//! The `generate → train → evaluate → compare / sweep → report` pipeline.
//!
//! All artifacts of a run live under the config's `out_dir`:
//!
//! ```text
//! config.toml              resolved config
//! data/{train,test}.opds   datasets
//! model/deeponet.ckpt      trained DeepONet and model/history.csv
//! model/<fcn|cnn>_<id>.*   baselines trained with `train --model`
//! eval/                    metrics.csv, summary.json, hist_<metric>.svg
//! compare/                 comparison.csv and the baseline checkpoints
//! sweep/                   trunk_widths.csv, iterations.csv
//! report.md                tables, plus erosion_residual.csv for Burgers
//! ```
//!
//! Every file records the config hash: a `# config_hash=` line in text
//! files, a `tag` in dataset manifests and a `config_hash` key in checkpoint
//! envelopes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ndarray::{s, Array2};
use onet_core::baselines::{self, BaselineKind, BaselineModel, EpochRow};
use onet_core::dataset::{
    load_dataset, resample_for_baseline, save_dataset_tagged, BaselineDataset, Manifest,
    OperatorDataset, ProblemId,
};
use onet_core::deeponet::{
    self, loss_value, DeepONet, DeepONetConfig, DeepONetError, HistoryRow, OperatorBatch, Trainer,
    TrainingHistory,
};
use onet_core::eval::{
    emit_report, erosion_assessment, evaluate_model, read_comparison_csv, read_metrics_csv,
    read_summary_json, write_comparison_csv, ComparisonRow, ErosionAssessment, EvalReport, Metric,
    MetricRecord, SummaryStats, DEFAULT_EROSION_C, WATER_DENSITY,
};
use onet_core::nn::checkpoint::CheckpointHeader;
use onet_core::rng::{child_seed, tagged_seed};
use onet_core::solvers::Grid2D;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// A config together with its hash and the artifact paths derived from it.
#[derive(Clone, Debug)]
pub struct Run {
    pub config: ExperimentConfig,
    pub hash: String,
}

impl Run {
    pub fn new(config: ExperimentConfig) -> Self {
        let hash = config.hash();
        Self { config, hash }
    }

    pub fn out(&self) -> &Path {
        &self.config.out_dir
    }

    pub fn train_data(&self) -> PathBuf {
        self.out().join("data/train.opds")
    }

    pub fn test_data(&self) -> PathBuf {
        self.out().join("data/test.opds")
    }

    pub fn checkpoint(&self) -> PathBuf {
        self.out().join("model/deeponet.ckpt")
    }

    pub fn history(&self) -> PathBuf {
        self.out().join("model/history.csv")
    }

    pub fn baseline_checkpoint(&self, kind: BaselineKind, function_id: usize) -> PathBuf {
        self.out()
            .join(format!("model/{}_{function_id}.ckpt", kind.as_str()))
    }

    pub fn eval_dir(&self) -> PathBuf {
        self.out().join("eval")
    }

    pub fn compare_dir(&self) -> PathBuf {
        self.out().join("compare")
    }

    pub fn sweep_dir(&self) -> PathBuf {
        self.out().join("sweep")
    }

    pub fn report(&self) -> PathBuf {
        self.out().join("report.md")
    }

    fn header_line(&self) -> String {
        format!("# config_hash={}\n", self.hash)
    }
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_rows<T: Serialize>(path: &Path, run: &Run, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(run.header_line().into_bytes());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::io(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io(path, e))?;
    write_text(
        path,
        &String::from_utf8(bytes).expect("csv output is UTF-8"),
    )
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    r.deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::io(path, e))
}

pub struct Generated {
    pub train: Manifest,
    pub test: Manifest,
    pub elapsed: Duration,
}

/// Generate both splits and the resolved config file.
pub fn generate(run: &Run) -> Result<Generated, CliError> {
    let start = Instant::now();
    write_text(
        &run.out().join("config.toml"),
        &format!("{}{}", run.header_line(), run.config.to_toml()),
    )?;
    let (train, test) = onet_core::dataset::build_datasets(&run.config.dataset_spec())?;
    let train = save_dataset_tagged(&train, &run.train_data(), Some(&run.hash))?;
    let test = save_dataset_tagged(&test, &run.test_data(), Some(&run.hash))?;
    Ok(Generated {
        train,
        test,
        elapsed: start.elapsed(),
    })
}

fn load_split(run: &Run, path: &Path, n_functions: usize) -> Result<OperatorDataset, CliError> {
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "{} not found; run `onet generate` first",
            path.display()
        )));
    }
    let d = load_dataset(path)?;
    let spec = run.config.dataset_spec();
    let matches = d.n_functions() == n_functions
        && d.n_queries() == spec.n_queries
        && d.layout == spec.layout
        && d.inputs.config == spec.grf
        && d.provenance.problem == spec.problem
        && d.provenance.master_seed == spec.seed;
    if !matches {
        return Err(CliError::Usage(format!(
            "{} was generated with different settings; run `onet generate` again",
            path.display()
        )));
    }
    Ok(d)
}

pub fn load_data(run: &Run) -> Result<(OperatorDataset, OperatorDataset), CliError> {
    let train = load_split(run, &run.train_data(), run.config.dataset.n_train)?;
    let test = load_split(run, &run.test_data(), run.config.dataset.n_test)?;
    Ok((train, test))
}

fn history_rows(h: &TrainingHistory) -> Vec<HistoryRow> {
    h.initial.iter().chain(&h.rows).copied().collect()
}

pub fn read_history(path: &Path) -> Result<Vec<HistoryRow>, CliError> {
    read_rows(path)
}

fn tag_header(mut header: CheckpointHeader, run: &Run) -> CheckpointHeader {
    if let Some(obj) = header.envelope.as_object_mut() {
        obj.insert("config_hash".into(), run.hash.clone().into());
    }
    header
}

pub struct TrainedRun {
    pub model: DeepONet,
    pub history: TrainingHistory,
    pub elapsed: Duration,
}

/// Train the DeepONet described by the config and save checkpoint and
/// history. On divergence the history up to that point is still written.
pub fn train(run: &Run) -> Result<TrainedRun, CliError> {
    let (train, test) = load_data(run)?;
    train_with(run, &train, &test, run.config.architecture())
}

fn train_with(
    run: &Run,
    train: &OperatorDataset,
    test: &OperatorDataset,
    arch: DeepONetConfig,
) -> Result<TrainedRun, CliError> {
    let start = Instant::now();
    let mut trainer = Trainer::new(train, Some(test), arch, run.config.train_config())?;
    if let Err(e) = trainer.run() {
        if let DeepONetError::Divergence { history, .. } = &e {
            write_rows(&run.history(), run, &history_rows(history))?;
        }
        return Err(e.into());
    }
    let model = trainer.model;
    let history = trainer.history;
    let header = deeponet::checkpoint_header(
        &model,
        Some(run.config.problem),
        run.config.seed,
        trainer.optimizer.step_count,
        Some(&history),
    );
    create_dir(&run.out().join("model"))?;
    deeponet::save_checkpoint(&run.checkpoint(), &model, tag_header(header, run))?;
    write_rows(&run.history(), run, &history_rows(&history))?;
    Ok(TrainedRun {
        model,
        history,
        elapsed: start.elapsed(),
    })
}

pub fn load_model(run: &Run) -> Result<DeepONet, CliError> {
    let path = run.checkpoint();
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "{} not found; run `onet train` first",
            path.display()
        )));
    }
    Ok(deeponet::load_checkpoint(&path)?.0)
}

fn baseline_points_seed(run: &Run, function_id: usize) -> u64 {
    child_seed(
        tagged_seed(run.config.seed, "baseline-points"),
        function_id as u64,
    )
}

pub fn baseline_data(
    run: &Run,
    test: &OperatorDataset,
    function_id: usize,
) -> Result<BaselineDataset, CliError> {
    Ok(resample_for_baseline(
        test,
        function_id,
        run.config.baselines.n_points,
        baseline_points_seed(run, function_id),
    )?)
}

pub struct TrainedBaselineRun {
    pub model: BaselineModel,
    pub data: BaselineDataset,
    pub history: Vec<EpochRow>,
    pub record: MetricRecord,
}

fn fit_baseline(
    run: &Run,
    kind: BaselineKind,
    data: BaselineDataset,
    checkpoint: &Path,
) -> Result<TrainedBaselineRun, CliError> {
    let trained = baselines::train_baseline(kind, &data, &run.config.baseline_config(kind))?;
    let header = baselines::checkpoint_header(
        &trained.model,
        run.config.problem,
        data.source_function_id,
        run.config.seed,
        trained.steps,
    );
    if let Some(parent) = checkpoint.parent() {
        create_dir(parent)?;
    }
    baselines::save_checkpoint(checkpoint, &trained.model, tag_header(header, run))?;
    let pred = trained.model.predict(data.test_points.view())?;
    let record = MetricRecord::compute(data.source_function_id, &pred, &data.test_targets)?;
    Ok(TrainedBaselineRun {
        model: trained.model,
        data,
        history: trained.history,
        record,
    })
}

/// Train an FCN or CNN on resampled points of one test function.
pub fn train_baseline(
    run: &Run,
    kind: BaselineKind,
    function_id: usize,
) -> Result<TrainedBaselineRun, CliError> {
    let test = load_split(run, &run.test_data(), run.config.dataset.n_test)?;
    let data = baseline_data(run, &test, function_id)?;
    let out = fit_baseline(run, kind, data, &run.baseline_checkpoint(kind, function_id))?;
    let history = run
        .out()
        .join(format!("model/{}_{function_id}_history.csv", kind.as_str()));
    write_rows(&history, run, &out.history)?;
    Ok(out)
}

fn evaluate_on(model: &DeepONet, test: &OperatorDataset) -> Result<EvalReport, CliError> {
    let inputs = &test.inputs.values;
    Ok(evaluate_model(
        |i, points| {
            model
                .predict(inputs.slice(s![i..i + 1, ..]), points)
                .map(|p| p.row(0).to_vec())
        },
        test,
    )?)
}

/// Per-function metrics of the trained DeepONet on the test split.
pub fn evaluate(run: &Run) -> Result<EvalReport, CliError> {
    let model = load_model(run)?;
    let test = load_split(run, &run.test_data(), run.config.dataset.n_test)?;
    let report = evaluate_on(&model, &test)?;
    emit_report(
        &run.eval_dir(),
        &report,
        &[],
        &run.hash,
        run.config.histogram_bins,
    )?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: usize,
    /// Test metric of the training objective (mean L2 relative error by default).
    pub test_metric: f64,
    pub r2_mean: Option<f64>,
    pub r2_std: Option<f64>,
    pub mse_mean: Option<f64>,
    pub rmse_mean: Option<f64>,
    pub mae_mean: Option<f64>,
    pub rmse_mae_ratio_mean: Option<f64>,
}

impl SweepRow {
    fn new(parameter: &str, value: usize, test_metric: f64, s: &SummaryStats) -> Self {
        let mean = |m: Metric| s.get(m).map(|x| x.mean);
        Self {
            parameter: parameter.to_string(),
            value,
            test_metric,
            r2_mean: mean(Metric::R2),
            r2_std: s.r2.map(|x| x.std),
            mse_mean: mean(Metric::Mse),
            rmse_mean: mean(Metric::Rmse),
            mae_mean: mean(Metric::Mae),
            rmse_mae_ratio_mean: mean(Metric::RmseMaeRatio),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepKind {
    TrunkWidths,
    Iterations,
}

fn test_metric(run: &Run, model: &DeepONet, test: &OperatorDataset) -> Result<f64, CliError> {
    let batch = OperatorBatch::from_dataset(test);
    let pred = model.predict_batch(&batch)?;
    Ok(loss_value(
        run.config.train.metric,
        pred.view(),
        batch.targets.view(),
    )?)
}

/// Retrain with each trunk width of the config; one-hidden-layer trunks
/// `[d, width, latent]`.
pub fn sweep_trunk_widths(run: &Run) -> Result<Vec<SweepRow>, CliError> {
    let (train, test) = load_data(run)?;
    let mut rows = Vec::new();
    for &w in &run.config.sweep.trunk_widths {
        let arch = run.config.architecture_with_trunk(&[w]);
        let mut trainer = Trainer::new(&train, None, arch, run.config.train_config())?;
        trainer.run()?;
        let report = evaluate_on(&trainer.model, &test)?;
        rows.push(SweepRow::new(
            "trunk_width",
            w,
            test_metric(run, &trainer.model, &test)?,
            &report.summary,
        ));
    }
    write_rows(&run.sweep_dir().join("trunk_widths.csv"), run, &rows)?;
    Ok(rows)
}

/// One long training run evaluated at each listed iteration count.
pub fn sweep_iterations(run: &Run) -> Result<Vec<SweepRow>, CliError> {
    let (train, test) = load_data(run)?;
    let mut targets = run.config.sweep.iterations.clone();
    targets.sort_unstable();
    targets.dedup();
    let mut cfg = run.config.train_config();
    cfg.iterations = targets.last().copied().unwrap_or(0);
    let mut trainer = Trainer::new(&train, None, run.config.architecture(), cfg)?;
    let mut rows = Vec::new();
    for &t in &targets {
        trainer.run_until(t)?;
        let report = evaluate_on(&trainer.model, &test)?;
        rows.push(SweepRow::new(
            "iterations",
            t,
            test_metric(run, &trainer.model, &test)?,
            &report.summary,
        ));
    }
    write_rows(&run.sweep_dir().join("iterations.csv"), run, &rows)?;
    Ok(rows)
}

pub fn sweep(run: &Run, kinds: &[SweepKind]) -> Result<Vec<SweepRow>, CliError> {
    let mut rows = Vec::new();
    for kind in kinds {
        rows.extend(match kind {
            SweepKind::TrunkWidths => sweep_trunk_widths(run)?,
            SweepKind::Iterations => sweep_iterations(run)?,
        });
    }
    Ok(rows)
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>, CliError> {
    read_rows(path)
}

fn evaluated_records(run: &Run) -> Result<Vec<MetricRecord>, CliError> {
    let path = run.eval_dir().join("metrics.csv");
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "{} not found; run `onet evaluate` first",
            path.display()
        )));
    }
    Ok(read_metrics_csv(&path)?)
}

/// Train FCN and CNN baselines on the highest- and lowest-R² test functions
/// of the evaluated DeepONet and tabulate all three models.
pub fn compare(run: &Run) -> Result<Vec<ComparisonRow>, CliError> {
    let records = evaluated_records(run)?;
    let summary = SummaryStats::from_records(&records);
    let (Some(best), Some(worst)) = (summary.argmax_id, summary.argmin_id) else {
        return Err(CliError::Numeric(
            "no test function has a defined R²".into(),
        ));
    };
    let test = load_split(run, &run.test_data(), run.config.dataset.n_test)?;
    let mut rows = Vec::new();
    for (case, id) in [("highest", best), ("lowest", worst)] {
        let record = records
            .iter()
            .find(|r| r.function_id == id)
            .expect("argmax/argmin come from the records");
        rows.push(ComparisonRow::from_record(case, "deeponet", record));
        let data = baseline_data(run, &test, id)?;
        for kind in [BaselineKind::Fcn, BaselineKind::Cnn] {
            let path = run
                .compare_dir()
                .join(format!("{}_{id}.ckpt", kind.as_str()));
            let fitted = fit_baseline(run, kind, data.clone(), &path)?;
            rows.push(ComparisonRow::from_record(
                case,
                kind.as_str(),
                &fitted.record,
            ));
        }
    }
    create_dir(&run.compare_dir())?;
    write_comparison_csv(&run.compare_dir().join("comparison.csv"), &rows, &run.hash)?;
    Ok(rows)
}

/// Simulated and predicted fields of one test function on the full solver grid.
pub fn full_fields(
    model: &DeepONet,
    test: &OperatorDataset,
    function_id: usize,
) -> Result<(Grid2D, Grid2D), CliError> {
    let grid = test.resolve(function_id)?;
    if grid.coords.ncols() != 2 {
        return Err(CliError::Usage(
            "field comparison needs a space-time problem".into(),
        ));
    }
    let x0 = grid.coords[[0, 0]];
    let nt = grid
        .coords
        .column(0)
        .iter()
        .take_while(|&&x| x == x0)
        .count();
    let nx = grid.len() / nt;
    let x: Vec<f64> = (0..nx).map(|i| grid.coords[[i * nt, 0]]).collect();
    let t: Vec<f64> = (0..nt).map(|j| grid.coords[[j, 1]]).collect();
    let pred = model.predict(
        test.inputs
            .values
            .slice(s![function_id..function_id + 1, ..]),
        grid.coords.view(),
    )?;
    let sim = Grid2D {
        x: x.clone(),
        t: t.clone(),
        values: Array2::from_shape_vec((nx, nt), grid.values).expect("node order is x-major"),
    };
    let pred = Grid2D {
        x,
        t,
        values: pred
            .into_shape_with_order((nx, nt))
            .expect("one prediction per node"),
    };
    Ok((sim, pred))
}

/// Erosion analysis of the lowest-R² Burgers test function; also writes the
/// squared-residual map.
pub fn erosion(run: &Run) -> Result<(usize, ErosionAssessment), CliError> {
    if run.config.problem != ProblemId::Burgers {
        return Err(CliError::Usage(
            "the erosion analysis applies to the Burgers problem".into(),
        ));
    }
    let records = evaluated_records(run)?;
    let id = SummaryStats::from_records(&records)
        .argmin_id
        .ok_or_else(|| CliError::Numeric("no test function has a defined R²".into()))?;
    let model = load_model(run)?;
    let test = load_split(run, &run.test_data(), run.config.dataset.n_test)?;
    let (sim, pred) = full_fields(&model, &test, id)?;
    let a = erosion_assessment(&sim, &pred, DEFAULT_EROSION_C, WATER_DENSITY)?;
    let mut text = run.header_line();
    text.push_str("x,t,squared_residual\n");
    for ((i, j), v) in a.squared_residual.indexed_iter() {
        let _ = writeln!(text, "{},{},{v:e}", sim.x[i], sim.t[j]);
    }
    write_text(&run.out().join("erosion_residual.csv"), &text)?;
    Ok((id, a))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4e}"))
}

/// Collect whatever results exist into `report.md`.
pub fn report(run: &Run) -> Result<PathBuf, CliError> {
    let summary_path = run.eval_dir().join("summary.json");
    if !summary_path.exists() {
        return Err(CliError::Usage(format!(
            "{} not found; run `onet evaluate` first",
            summary_path.display()
        )));
    }
    let (eval_hash, summary) = read_summary_json(&summary_path)?;
    let mut md = format!(
        "<!-- config_hash={} -->\n# {} run\n\n",
        run.hash, run.config.problem
    );
    if eval_hash != run.hash {
        let _ = writeln!(md, "Evaluation was produced with config {eval_hash}.\n");
    }
    let _ = writeln!(md, "## Test metrics ({} functions)\n", summary.n_records);
    md.push_str("| Statistics | R² | MSE | RMSE | MAE | RMSE/MAE |\n|---|---|---|---|---|---|\n");
    type Pick = fn(&onet_core::eval::MetricSummary) -> f64;
    let stats: [(&str, Pick); 4] = [
        ("Mean", |s| s.mean),
        ("Std", |s| s.std),
        ("Min", |s| s.min),
        ("Max", |s| s.max),
    ];
    for (name, pick) in stats {
        let cells: Vec<String> = Metric::ALL
            .iter()
            .map(|&m| fmt_opt(summary.get(m).map(pick)))
            .collect();
        let _ = writeln!(md, "| {name} | {} |", cells.join(" | "));
    }
    if let (Some(hi), Some(lo)) = (summary.argmax_id, summary.argmin_id) {
        let _ = writeln!(
            md,
            "\nHighest R²: test function {hi}. Lowest R²: test function {lo}."
        );
    }

    let cmp = run.compare_dir().join("comparison.csv");
    if cmp.exists() {
        md.push_str("\n## Comparison with baselines\n\n| Test ID | Model | R² | MSE | RMSE | MAE | RMSE/MAE |\n|---|---|---|---|---|---|---|\n");
        for r in read_comparison_csv(&cmp)? {
            let _ = writeln!(
                md,
                "| {} ({}) | {} | {} | {:.4e} | {:.4e} | {:.4e} | {} |",
                r.function_id,
                r.case,
                r.model,
                fmt_opt(r.r2),
                r.mse,
                r.rmse,
                r.mae,
                fmt_opt(r.rmse_mae_ratio)
            );
        }
    }

    for (file, title) in [
        ("trunk_widths.csv", "Trunk width sweep"),
        ("iterations.csv", "Iteration sweep"),
    ] {
        let path = run.sweep_dir().join(file);
        if !path.exists() {
            continue;
        }
        let _ = writeln!(md, "\n## {title}\n\n| Value | Test metric | Mean R² | Mean MSE | Mean RMSE | Mean MAE | Mean RMSE/MAE |\n|---|---|---|---|---|---|---|");
        for r in read_sweep(&path)? {
            let _ = writeln!(
                md,
                "| {} | {:.4e} | {} | {} | {} | {} | {} |",
                r.value,
                r.test_metric,
                fmt_opt(r.r2_mean),
                fmt_opt(r.mse_mean),
                fmt_opt(r.rmse_mean),
                fmt_opt(r.mae_mean),
                fmt_opt(r.rmse_mae_ratio_mean)
            );
        }
    }

    if run.config.problem == ProblemId::Burgers && run.checkpoint().exists() {
        let (id, a) = erosion(run)?;
        let _ = writeln!(
            md,
            "\n## Erosion check (test function {id})\n\n\
             - erosion velocity: {:.3} m/s\n\
             - maximum speed: simulated {:.3} m/s, predicted {:.3} m/s\n\
             - largest squared residual at (x, t) = ({:.2}, {:.2}): simulated {:.3} m/s, predicted {:.3} m/s, ratio {:.3}\n\
             - squared residual map: erosion_residual.csv",
            a.erosion_velocity,
            a.max_speed_true,
            a.max_speed_pred,
            a.worst_point.0,
            a.worst_point.1,
            a.speed_true_at_worst,
            a.speed_pred_at_worst,
            a.risk_ratio
        );
    }
    let path = run.report();
    write_text(&path, &md)?;
    Ok(path)
}
