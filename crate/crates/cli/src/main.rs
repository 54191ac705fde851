use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use onet_cli::commands::{self, SweepKind};
use onet_cli::{CliError, ExperimentConfig, Run};
use onet_core::baselines::BaselineKind;
use onet_core::dataset::ProblemId;

#[derive(Parser)]
#[command(
    name = "onet",
    version,
    about = "Operator learning with DeepONets on ODE and PDE benchmarks"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Use the built-in defaults of a problem instead of a config file.
    #[arg(long, global = true)]
    problem: Option<ProblemId>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Training iterations of the DeepONet.
    #[arg(long, global = true)]
    iterations: Option<usize>,
    /// Output directory of the run.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Use the full-size dataset of the config.
    #[arg(long, global = true)]
    full: bool,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample input functions, solve, and write both dataset splits.
    Generate,
    /// Train the DeepONet, or a baseline on one test function.
    Train {
        #[arg(long, value_enum, default_value_t = ModelArg::Deeponet)]
        model: ModelArg,
        /// Test function a baseline is trained on.
        #[arg(long)]
        function_id: Option<usize>,
    },
    /// Per-function test metrics, summary statistics and histograms.
    Evaluate,
    /// Retrain over trunk widths and/or evaluate along training.
    Sweep {
        #[arg(long, value_enum, default_value_t = SweepArg::Both)]
        kind: SweepArg,
    },
    /// DeepONet against FCN and CNN on the best and worst test functions.
    Compare,
    /// Write report.md from the available results.
    Report,
    /// generate, train, evaluate and report in one go.
    Run,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Deeponet,
    Fcn,
    Cnn,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    Widths,
    Iterations,
    Both,
}

fn resolve_config(c: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match (&c.config, c.problem) {
        (Some(path), None) => ExperimentConfig::load(path)?,
        (None, Some(p)) => ExperimentConfig::published(p),
        (Some(_), Some(_)) => {
            return Err(CliError::Usage(
                "give either --config or --problem, not both".into(),
            ))
        }
        (None, None) => {
            return Err(CliError::Usage(
                "one of --config or --problem is required".into(),
            ))
        }
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(it) = c.iterations {
        cfg.train.iterations = it;
    }
    if let Some(out) = &c.out {
        cfg.out_dir = out.clone();
    }
    if c.full {
        cfg.apply_full();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_summary(report: &onet_core::EvalReport) {
    let s = &report.summary;
    if let Some(r2) = &s.r2 {
        println!(
            "R²: mean {:.4} std {:.4} min {:.4} max {:.4}",
            r2.mean, r2.std, r2.min, r2.max
        );
    }
    if let (Some(mse), Some(ratio)) = (&s.mse, &s.rmse_mae_ratio) {
        println!("MSE mean {:.4e}, RMSE/MAE mean {:.4}", mse.mean, ratio.mean);
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    let run = Run::new(resolve_config(&cli.common)?);
    println!("config {} -> {}", run.hash, run.out().display());
    match cli.command {
        Command::Generate => {
            let g = commands::generate(&run)?;
            println!(
                "generated {} train and {} test functions in {:.1?}",
                g.train.n_functions, g.test.n_functions, g.elapsed
            );
        }
        Command::Train { model, function_id } => match (model, function_id) {
            (ModelArg::Deeponet, None) => {
                let t = commands::train(&run)?;
                if let Some(last) = t.history.last() {
                    println!(
                        "trained {} iterations in {:.1?}: train loss {:.4e}, test metric {:.4e}",
                        last.iteration, t.elapsed, last.train_loss, last.test_metric
                    );
                }
            }
            (ModelArg::Deeponet, Some(_)) => {
                return Err(CliError::Usage("--function-id applies to baselines".into()))
            }
            (ModelArg::Fcn | ModelArg::Cnn, None) => {
                return Err(CliError::Usage("baselines need --function-id".into()))
            }
            (kind, Some(id)) => {
                let kind = if matches!(kind, ModelArg::Fcn) {
                    BaselineKind::Fcn
                } else {
                    BaselineKind::Cnn
                };
                let b = commands::train_baseline(&run, kind, id)?;
                println!(
                    "{} on test function {id}: R² {:?}, MSE {:.4e}",
                    kind.as_str(),
                    b.record.r2,
                    b.record.mse
                );
            }
        },
        Command::Evaluate => print_summary(&commands::evaluate(&run)?),
        Command::Sweep { kind } => {
            let kinds: &[SweepKind] = match kind {
                SweepArg::Widths => &[SweepKind::TrunkWidths],
                SweepArg::Iterations => &[SweepKind::Iterations],
                SweepArg::Both => &[SweepKind::TrunkWidths, SweepKind::Iterations],
            };
            for r in commands::sweep(&run, kinds)? {
                println!(
                    "{} {}: test metric {:.4e}, mean R² {:?}",
                    r.parameter, r.value, r.test_metric, r.r2_mean
                );
            }
        }
        Command::Compare => {
            for r in commands::compare(&run)? {
                println!(
                    "{:>7} {:>5} {:>8}: R² {:?}, MSE {:.4e}",
                    r.case, r.function_id, r.model, r.r2, r.mse
                );
            }
        }
        Command::Report => println!("wrote {}", commands::report(&run)?.display()),
        Command::Run => {
            commands::generate(&run)?;
            commands::train(&run)?;
            print_summary(&commands::evaluate(&run)?);
            println!("wrote {}", commands::report(&run)?.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
