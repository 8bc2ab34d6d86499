//! `aha`: pretrain the LTM, run single evaluations and full sweeps, build
//! reports and run the invariant suites.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Parser, Subcommand, ValueEnum};

use aha_core::config::{Config, ConfigError};
use aha_core::dataset::synth::SynthCorpus;
use aha_core::dataset::{build_run, CorruptionKind, DatasetError, Task};
use aha_core::harness::{self, report, HarnessError, StmKind, RESULTS_FILE};
use aha_core::ltm::{self, CheckpointError, Ltm, LtmError};
use aha_core::selftest;

#[derive(Parser)]
#[command(name = "aha", version, about = "Complementary learning systems on one-shot glyph benchmarks")]
struct Cli {
    /// JSON config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Caps the sweep at 5 levels, 3 seeds and 5 runs.
    #[arg(long, global = true)]
    fast: bool,
    /// Worker threads for the sweep (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pretrain the LTM on the background split and write its checkpoint.
    Pretrain,
    /// Study one run and evaluate it under one corruption.
    Eval {
        #[arg(long, value_enum, default_value_t = TaskArg::Classification)]
        task: TaskArg,
        #[arg(long, value_enum, default_value_t = KindArg::Noise)]
        kind: KindArg,
        #[arg(long, default_value_t = 0.0)]
        level: f64,
        #[arg(long, default_value_t = 0)]
        run: usize,
        #[arg(long, value_enum, default_value_t = StmArg::Both)]
        stm: StmArg,
    },
    /// Run every (task, seed, run) unit and write results.csv.
    Sweep,
    /// Aggregate a results CSV and draw one chart per task and corruption.
    Report {
        /// Defaults to `<output_dir>/results.csv`.
        #[arg(long)]
        results: Option<PathBuf>,
        /// Defaults to the directory holding the results.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gradient, Hopfield, pattern-separation and corruption invariants.
    Selftest,
    /// Write the procedural corpus as a PNG tree in the Omniglot layout.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Classification,
    Instance,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Occlusion,
    Noise,
}

#[derive(Clone, Copy, ValueEnum)]
enum StmArg {
    Aha,
    Fastnn,
    Both,
}

/// Failure classes with their exit codes.
#[derive(Debug)]
enum Failure {
    /// 2
    Config(String),
    /// 3
    Input(String),
    /// 1
    Internal(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Input(_) => 3,
            Failure::Internal(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "bad config: {m}"),
            Failure::Input(m) => write!(f, "{m}"),
            Failure::Internal(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        Failure::Input(format!("dataset: {e}"))
    }
}

impl From<CheckpointError> for Failure {
    fn from(e: CheckpointError) -> Self {
        Failure::Input(format!("{e} (run `aha pretrain` first?)"))
    }
}

impl From<LtmError> for Failure {
    fn from(e: LtmError) -> Self {
        match e {
            LtmError::Config(m) => Failure::Config(m),
            LtmError::NoData => Failure::Input(e.to_string()),
            other => Failure::Internal(other.into()),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Dataset(d) => d.into(),
            HarnessError::NoResults(_) | HarnessError::Malformed { .. } => Failure::Input(e.to_string()),
            HarnessError::Io { ref source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
                Failure::Input(e.to_string())
            }
            HarnessError::Mismatch(m) => Failure::Config(m),
            other => Failure::Internal(other.into()),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Internal(anyhow!("{}: {e}", path.display()))
}

fn load_config(cli: &Cli) -> Result<Config, Failure> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if cli.fast {
        config = config.fast();
    }
    Ok(config)
}

fn load_ltm(config: &Config) -> Result<Ltm, Failure> {
    let path = config.checkpoint_path();
    let ltm = ltm::read_checkpoint(&path)?;
    if ltm.config() != &config.ltm {
        return Err(Failure::Config(format!(
            "checkpoint {} was trained with a different ltm section",
            path.display()
        )));
    }
    Ok(ltm)
}

fn pretrain(config: &Config) -> Result<(), Failure> {
    let data = config.load_dataset()?;
    log::info!(
        "pretraining on {} background images",
        data.background.samples.len()
    );
    let (ltm, report) = ltm::pretrain(&data.background, &config.ltm, config.seed)?;
    let path = config.checkpoint_path();
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    }
    ltm::write_checkpoint(&ltm, &path).map_err(|e| Failure::Internal(e.into()))?;
    config
        .echo(&config.output_dir)
        .map_err(|e| io_failure(&config.output_dir, e))?;
    println!(
        "trained on {} images; holdout MSE {:.5} -> {:.5}",
        report.train_images,
        report.initial_holdout_loss,
        report.epoch_holdout_loss.last().copied().unwrap_or(report.initial_holdout_loss)
    );
    println!("checkpoint: {}", path.display());
    Ok(())
}

fn eval(config: &Config, task: Task, kind: CorruptionKind, level: f64, run: usize, stm: StmKind) -> Result<(), Failure> {
    if !(0.0..=1.0).contains(&level) {
        return Err(Failure::Config(format!("level {level} is outside [0, 1]")));
    }
    let ltm = load_ltm(config)?;
    let data = config.load_dataset()?;
    let spec = build_run(&data.evaluation, task, config.seed, run)?;
    let result = harness::evaluate_run(&ltm, &config.stm_configs(), stm, &spec, (kind, level), config.seed, run)?;
    println!(
        "{} run {} seed {}: {} at level {:.3}",
        result.task, result.run, result.seed, kind, level
    );
    for o in &result.outcomes {
        match o.recall_loss {
            Some(loss) => println!("  {:<7} accuracy {:.3}  recall loss {:.5}", o.signal.as_str(), o.accuracy, loss),
            None => println!("  {:<7} accuracy {:.3}", o.signal.as_str(), o.accuracy),
        }
    }
    if stm != StmKind::FastNn {
        println!(
            "  PC: {} queries unconverged, {} settled on a stored code",
            result.diagnostics.pc_unconverged, result.diagnostics.pc_on_stored
        );
    }
    Ok(())
}

fn sweep(config: &Config, workers: usize) -> Result<(), Failure> {
    let ltm = load_ltm(config)?;
    let data = config.load_dataset()?;
    config
        .echo(&config.output_dir)
        .map_err(|e| io_failure(&config.output_dir, e))?;
    let summary = harness::sweep(
        &ltm,
        &data.evaluation,
        &config.stm_configs(),
        &config.sweep,
        config.seed,
        &config.output_dir,
        workers,
    )?;
    println!(
        "{} units ({} resumed), {} rows -> {}",
        summary.units,
        summary.resumed,
        summary.rows,
        summary.results.display()
    );
    Ok(())
}

fn report(config: &Config, results: Option<PathBuf>, out: Option<PathBuf>) -> Result<(), Failure> {
    let results = results.unwrap_or_else(|| config.output_dir.join(RESULTS_FILE));
    if !results.exists() {
        return Err(Failure::Input(format!("no results file at {}", results.display())));
    }
    let out = out.unwrap_or_else(|| results.parent().map(Path::to_path_buf).unwrap_or_default());
    let files = report::write_report(&results, &out)?;
    println!("{}", files.aggregate.display());
    println!("{}", files.recall_aggregate.display());
    for chart in &files.charts {
        println!("{}", chart.display());
    }
    Ok(())
}

fn selftest(seed: u64) -> Result<(), Failure> {
    let suites = selftest::run_all(seed);
    for suite in &suites {
        print!("{suite}");
    }
    let failed: Vec<&str> = suites.iter().filter(|s| !s.passed()).map(|s| s.suite).collect();
    if failed.is_empty() {
        println!("all suites passed");
        Ok(())
    } else {
        Err(Failure::Internal(anyhow!("failing suites: {}", failed.join(", "))))
    }
}

fn synth(config: &Config, out: &Path) -> Result<(), Failure> {
    let corpus = SynthCorpus::new(config.synthetic.clone().unwrap_or_default());
    corpus.write_tree(out).map_err(|e| io_failure(out, e))?;
    println!("wrote synthetic corpus to {}", out.display());
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let config = load_config(&cli)?;
    match cli.command {
        Command::Pretrain => pretrain(&config),
        Command::Eval {
            task,
            kind,
            level,
            run,
            stm,
        } => {
            let task = match task {
                TaskArg::Classification => Task::Classification,
                TaskArg::Instance => Task::Instance,
            };
            let kind = match kind {
                KindArg::Occlusion => CorruptionKind::Occlusion,
                KindArg::Noise => CorruptionKind::Noise,
            };
            let stm = match stm {
                StmArg::Aha => StmKind::Aha,
                StmArg::Fastnn => StmKind::FastNn,
                StmArg::Both => StmKind::Both,
            };
            eval(&config, task, kind, level, run, stm)
        }
        Command::Sweep => sweep(&config, cli.workers),
        Command::Report { results, out } => report(&config, results, out),
        Command::Selftest => selftest(config.seed),
        Command::Synth { out } => synth(&config, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.code())
        }
    }
}
