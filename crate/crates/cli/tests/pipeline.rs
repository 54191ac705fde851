use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use onet_cli::commands::{self, SweepKind};
use onet_cli::{ExperimentConfig, Run};
use onet_core::baselines::{self, BaselineKind};
use onet_core::dataset::{load_dataset, read_manifest, ProblemId};
use onet_core::deeponet::{self, DeepONet, TrainConfig};
use onet_core::eval::{
    read_metrics_csv, read_summary_json, Metric, MetricRecord, MetricSummary, SummaryStats,
};
use onet_core::rng::{seeded, tagged_seed};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn onet(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_onet"))
        .args(args)
        .output()
        .unwrap()
}

fn small_ode(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::published(ProblemId::Ode);
    cfg.out_dir = out.to_path_buf();
    cfg.dataset.n_train = 30;
    cfg.dataset.n_test = 40;
    cfg.dataset.n_queries = 20;
    cfg.train.iterations = 300;
    cfg.baselines.epochs = 30;
    cfg.sweep.trunk_widths = vec![40];
    cfg.sweep.iterations = vec![100, 300];
    cfg
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        out.push((
            p.file_name().unwrap().to_string_lossy().into_owned(),
            fs::read(&p).unwrap(),
        ));
    }
    out.sort();
    out
}

#[test]
fn checked_in_configs_parse() {
    let mut names = Vec::new();
    for e in fs::read_dir(configs_dir()).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "cfg") {
            ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            names.push(p.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    for required in [
        "ode.cfg",
        "diffusion.cfg",
        "burgers.cfg",
        "diffusion-desk.cfg",
    ] {
        assert!(names.iter().any(|n| n == required), "missing {required}");
    }
    let ode = ExperimentConfig::load(&configs_dir().join("ode.cfg")).unwrap();
    let mut published = ExperimentConfig::published(ProblemId::Ode);
    published.out_dir = ode.out_dir.clone();
    assert_eq!(ode, published);
    let burgers = ExperimentConfig::load(&configs_dir().join("burgers.cfg")).unwrap();
    assert_eq!(burgers.grf(), ProblemId::Burgers.default_grf());
    assert_eq!(
        (
            burgers.dataset.n_train,
            burgers.dataset.n_test,
            burgers.train.iterations
        ),
        (150, 1000, 50_000)
    );
    let mut desk = ExperimentConfig::load(&configs_dir().join("diffusion-desk.cfg")).unwrap();
    assert_eq!(desk.dataset.n_train * desk.dataset.n_queries, 100_000);
    desk.apply_full();
    let full = ExperimentConfig::load(&configs_dir().join("diffusion.cfg")).unwrap();
    assert_eq!(desk.dataset_spec(), full.dataset_spec());
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(onet(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(onet(&["generate"]).status.code(), Some(1));
    assert_eq!(
        onet(&["train", "--problem", "ode", "--out", out])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        onet(&["train", "--problem", "ode", "--model", "fcn", "--out", out])
            .status
            .code(),
        Some(1)
    );
    let missing = dir.path().join("missing.cfg");
    assert_eq!(
        onet(&["generate", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(3)
    );
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "problem = \"ode\"\n[train]\nlr = 1\n").unwrap();
    assert_eq!(
        onet(&["generate", "--config", bad.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(onet(&["--help"]).status.code(), Some(0));
}

#[test]
fn generate_is_byte_identical_and_sized() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = onet(&[
            "generate",
            "--problem",
            "ode",
            "--seed",
            "42",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for split in ["train.opds", "test.opds"] {
        assert_eq!(
            read_dir_bytes(&a.join("data").join(split)),
            read_dir_bytes(&b.join("data").join(split))
        );
    }
    let train = read_manifest(&a.join("data/train.opds")).unwrap();
    let test = read_manifest(&a.join("data/test.opds")).unwrap();
    assert_eq!((train.n_functions, test.n_functions), (150, 1000));
    let hash = {
        let mut c = ExperimentConfig::published(ProblemId::Ode);
        c.seed = 42;
        c.hash()
    };
    assert_eq!(train.tag.as_deref(), Some(hash.as_str()));
    // Reload verifies every blob checksum.
    assert_eq!(
        load_dataset(&a.join("data/test.opds"))
            .unwrap()
            .n_functions(),
        1000
    );
    let cfg_text = fs::read_to_string(a.join("config.toml")).unwrap();
    assert!(cfg_text.starts_with(&format!("# config_hash={hash}\n")));
}

#[test]
fn zero_iterations_saves_the_initialisation() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_ode(dir.path());
    cfg.train.iterations = 0;
    let run = Run::new(cfg);
    commands::generate(&run).unwrap();
    commands::train(&run).unwrap();
    let (saved, header, _) = deeponet::load_checkpoint(&run.checkpoint()).unwrap();
    let init = DeepONet::new(
        run.config.architecture(),
        &mut seeded(tagged_seed(run.config.seed, "deeponet-init")),
    )
    .unwrap();
    assert_eq!(saved, init);
    assert_eq!(header.step_count, 0);
    assert_eq!(header.envelope["config_hash"], run.hash.as_str());
    let history = commands::read_history(&run.history()).unwrap();
    assert_eq!(history.len(), 1);
    assert_eq!(history[0].iteration, 0);
}

#[test]
fn pipeline_outputs_are_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let run = Run::new(small_ode(dir.path()));
    commands::generate(&run).unwrap();
    let trained = commands::train(&run).unwrap();
    assert_eq!(trained.history.rows.len(), 3);
    let report = commands::evaluate(&run).unwrap();

    // Evaluating the same checkpoint again gives identical files.
    let first = read_dir_bytes(&run.eval_dir());
    commands::evaluate(&run).unwrap();
    assert_eq!(read_dir_bytes(&run.eval_dir()), first);
    for (name, bytes) in &first {
        let text = String::from_utf8_lossy(bytes);
        assert!(
            text.contains(&format!(
                "config_hash{}{}",
                if name.ends_with(".json") {
                    "\": \""
                } else {
                    "="
                },
                run.hash
            )),
            "{name}"
        );
    }

    // Re-aggregate the per-record CSV independently of SummaryStats.
    let records = read_metrics_csv(&run.eval_dir().join("metrics.csv")).unwrap();
    assert_eq!(records, report.records);
    let (_, summary) = read_summary_json(&run.eval_dir().join("summary.json")).unwrap();
    for m in Metric::ALL {
        let v: Vec<f64> = records.iter().filter_map(|r| r.get(m)).collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let s: &MetricSummary = summary.get(m).unwrap();
        assert!(
            (s.mean - mean).abs() <= 1e-12 * mean.abs().max(1e-300),
            "{m:?} mean"
        );
        assert!(
            (s.std - std).abs() <= 1e-9 * std.abs().max(1e-300),
            "{m:?} std"
        );
        assert_eq!(s.min, v.iter().copied().fold(f64::INFINITY, f64::min));
        assert_eq!(s.max, v.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }

    // Comparison: DeepONet rows come from the evaluation, baseline rows can
    // be recomputed from their checkpoints.
    let rows = commands::compare(&run).unwrap();
    assert_eq!(rows.len(), 6);
    let expected: Vec<(&str, &str)> = ["highest", "lowest"]
        .iter()
        .flat_map(|c| ["deeponet", "fcn", "cnn"].map(|m| (*c, m)))
        .collect();
    assert_eq!(
        rows.iter()
            .map(|r| (r.case.as_str(), r.model.as_str()))
            .collect::<Vec<_>>(),
        expected
    );
    let stats = SummaryStats::from_records(&records);
    assert_eq!(rows[0].function_id, stats.argmax_id.unwrap());
    assert_eq!(rows[3].function_id, stats.argmin_id.unwrap());
    let test = load_dataset(&run.test_data()).unwrap();
    for r in &rows {
        if r.model == "deeponet" {
            let rec = report.record(r.function_id).unwrap();
            assert_eq!((r.r2, r.mse, r.mae), (rec.r2, rec.mse, rec.mae));
            continue;
        }
        let ckpt = run
            .compare_dir()
            .join(format!("{}_{}.ckpt", r.model, r.function_id));
        let (model, _, envelope) = baselines::load_checkpoint(&ckpt).unwrap();
        assert_eq!(envelope.function_id, r.function_id);
        let data = commands::baseline_data(&run, &test, r.function_id).unwrap();
        let pred = model.predict(data.test_points.view()).unwrap();
        let rec = MetricRecord::compute(r.function_id, &pred, &data.test_targets).unwrap();
        assert_eq!(
            (rec.r2, rec.mse, rec.rmse, rec.mae),
            (r.r2, r.mse, r.rmse, r.mae)
        );
    }

    // A one-width sweep at the configured width equals the plain run.
    let sweep = commands::sweep(&run, &[SweepKind::TrunkWidths, SweepKind::Iterations]).unwrap();
    assert_eq!(sweep.len(), 3);
    let w = &sweep[0];
    assert_eq!(w.value, 40);
    assert_eq!(w.r2_mean, report.summary.r2.map(|s| s.mean));
    assert_eq!(w.mse_mean, report.summary.mse.map(|s| s.mean));
    assert_eq!(w.test_metric, trained.history.last().unwrap().test_metric);
    // The last iteration checkpoint is the same training run as well.
    assert_eq!(sweep[2].value, 300);
    assert_eq!(sweep[2].r2_mean, w.r2_mean);
    let text = fs::read_to_string(run.sweep_dir().join("iterations.csv")).unwrap();
    assert!(text.starts_with(&format!("# config_hash={}\n", run.hash)));

    let md = fs::read_to_string(commands::report(&run).unwrap()).unwrap();
    for row in [
        "| Mean |",
        "| Std |",
        "| Min |",
        "| Max |",
        "Comparison with baselines",
        "Trunk width sweep",
        "Iteration sweep",
    ] {
        assert!(md.contains(row), "report lacks {row}");
    }
}

#[test]
fn baseline_training_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_ode(dir.path());
    let path = dir.path().join("small.cfg");
    fs::write(&path, cfg.to_toml()).unwrap();
    let p = path.to_str().unwrap();
    assert!(onet(&["generate", "--config", p]).status.success());
    let o = onet(&[
        "train",
        "--config",
        p,
        "--model",
        "fcn",
        "--function-id",
        "3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run = Run::new(cfg);
    let (model, header, envelope) =
        baselines::load_checkpoint(&run.baseline_checkpoint(BaselineKind::Fcn, 3)).unwrap();
    assert_eq!(model.kind(), BaselineKind::Fcn);
    assert_eq!(envelope.function_id, 3);
    assert_eq!(header.step_count, 30 * 5);
    assert_eq!(
        onet(&[
            "train",
            "--config",
            p,
            "--model",
            "cnn",
            "--function-id",
            "40"
        ])
        .status
        .code(),
        Some(1)
    );
}

#[test]
fn divergence_exits_with_code_two_and_keeps_history() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_ode(dir.path());
    cfg.train.learning_rate = 1e100;
    cfg.train.log_every = 1;
    cfg.train.iterations = 50;
    let path = dir.path().join("wild.cfg");
    fs::write(&path, cfg.to_toml()).unwrap();
    let p = path.to_str().unwrap();
    assert!(onet(&["generate", "--config", p]).status.success());
    let o = onet(&["train", "--config", p]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let run = Run::new(cfg);
    let history = commands::read_history(&run.history()).unwrap();
    assert!(!history.is_empty());
    assert!(!run.checkpoint().exists());
}

#[test]
fn default_training_config_matches_the_published_protocol() {
    let cfg = ExperimentConfig::published(ProblemId::Burgers).train_config();
    let d = TrainConfig::default();
    assert_eq!(
        (
            cfg.iterations,
            cfg.adam.lr,
            cfg.loss,
            cfg.metric,
            cfg.log_every
        ),
        (50_000, 1e-3, d.loss, d.metric, 100)
    );
}
