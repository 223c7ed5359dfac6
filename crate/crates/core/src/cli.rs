//! Command implementations behind the `deesil` binary, plus the run
//! configuration file.
//!
//! A run is described by one TOML document:
//!
//! ```toml
//! output_dir = "out"
//!
//! [experiment]
//! memory_budget = 500
//! strategy = "rand"
//! seed = 7
//! c_grid = [0.01, 0.1, 1.0, 10.0]
//!
//! [data.synthetic]
//! classes = 50
//! dim = 32
//! train_per_class = 100
//! test_per_class = 20
//! separation = 6.0
//!
//! [plan]
//! batch_size = 10
//! ```
//!
//! Instead of `[data.synthetic]`, `[data]` may name feature files with
//! `train`, `test` and `external`. `DEESIL_OUTPUT_DIR` and `DEESIL_WORKERS`
//! override `output_dir` and `experiment.workers`.
//!
//! Exit codes: 1 for configuration errors, 2 for data errors, 3 for runtime
//! errors.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::engine::{
    load_checkpoint, run_protocol_with, save_checkpoint, sha256_hex, BatchPlan, Engine, EngineConfig,
};
use crate::error::Error;
use crate::eval::{
    self, emit_report, generate_external, generate_synthetic, parse_report, topk_accuracies,
    write_grid_table, EvalReport, ExperimentConfig, SyntheticSpec,
};
use crate::features::{
    load_dataset, ClassId, FeatureFile, FeatureFormat, FeatureVector, LabeledDataset, LabeledSamples,
};
use crate::memory::Strategy;

pub const ENV_OUTPUT_DIR: &str = "DEESIL_OUTPUT_DIR";
pub const ENV_WORKERS: &str = "DEESIL_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Config = 1,
    Data = 2,
    Runtime = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Config,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Data,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind as i32
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::InvalidParameter { .. } | Error::SeparationInfeasible { .. } | Error::KTooLarge { .. } => {
                ExitKind::Config
            }
            Error::Io { .. }
            | Error::Format { .. }
            | Error::ZeroVector { .. }
            | Error::NonFinite { .. }
            | Error::InsufficientSamples { .. }
            | Error::DimensionMismatch { .. }
            | Error::InsufficientExternal { .. }
            | Error::DuplicateClass(_)
            | Error::UnknownClass(_)
            | Error::UnknownClassInEvalSet(_)
            | Error::EmptyValidation(_)
            | Error::Checkpoint(_) => ExitKind::Data,
            Error::EmptyClass(_) | Error::EmptyInput(_) => ExitKind::Runtime,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// The whole run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Put measured wall times in `report.csv` instead of zeros. Timings are
    /// always written to `timings.csv`.
    #[serde(default)]
    pub record_wall_time: bool,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    pub data: DataConfig,
    pub plan: PlanConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub external: Option<PathBuf>,
    /// Inferred from the file extension when absent.
    pub format: Option<FeatureFormat>,
    pub synthetic: Option<SyntheticConfig>,
}

/// In-memory synthetic data; omitted fields fall back to the experiment's
/// seed and validation count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub classes: usize,
    pub dim: usize,
    pub train_per_class: usize,
    pub validation_per_class: Option<usize>,
    pub test_per_class: usize,
    pub separation: f64,
    pub seed: Option<u64>,
    /// Size of a generated external pool for the `ind` strategy.
    pub external_count: Option<usize>,
    #[serde(default = "default_external_concepts")]
    pub external_concepts: usize,
}

fn default_external_concepts() -> usize {
    100
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    pub batch_size: Option<usize>,
    pub batches: Option<Vec<Vec<ClassId>>>,
    /// Use only the first `num_batches` batches.
    pub num_batches: Option<usize>,
    /// Shuffle the class order before cutting batches.
    pub shuffle_seed: Option<u64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::config(format!("invalid config: {e}")))
    }

    /// Reads, applies environment overrides and validates.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        config.apply_env()?;
        config.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        config.validate()?;
        Ok(config)
    }

    pub fn apply_env(&mut self) -> CliResult<()> {
        if let Ok(dir) = std::env::var(ENV_OUTPUT_DIR) {
            self.output_dir = PathBuf::from(dir);
        }
        if let Ok(workers) = std::env::var(ENV_WORKERS) {
            self.experiment.workers = workers
                .parse()
                .map_err(|_| CliError::config(format!("{ENV_WORKERS} must be a positive integer")))?;
        }
        Ok(())
    }

    /// Makes relative data paths relative to the config's directory.
    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.data.train, &mut self.data.test, &mut self.data.external]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if self.output_dir.is_relative() && std::env::var(ENV_OUTPUT_DIR).is_err() {
            self.output_dir = base.join(&self.output_dir);
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let field = |name: &str, message: &str| CliError::config(format!("invalid parameter `{name}`: {message}"));
        self.experiment.validate().map_err(|e| match e {
            Error::InvalidParameter { field: f, message } => field(&f, &message),
            other => CliError::config(other.to_string()),
        })?;
        match (&self.data.train, &self.data.synthetic) {
            (Some(_), Some(_)) => return Err(field("data", "give either `train` or `synthetic`, not both")),
            (None, None) => return Err(field("data", "needs `train` or `synthetic`")),
            _ => {}
        }
        if let Some(s) = &self.data.synthetic {
            self.synthetic_spec(s).validate().map_err(CliError::from)?;
        }
        if self.experiment.strategy == Strategy::Ind && !self.has_external() {
            return Err(field(
                "data.external",
                "the ind strategy needs an external pool (`external` or `synthetic.external_count`)",
            ));
        }
        match (&self.plan.batch_size, &self.plan.batches) {
            (Some(0), _) => return Err(field("plan.batch_size", "must be at least 1")),
            (Some(_), Some(_)) => return Err(field("plan", "give either `batch_size` or `batches`")),
            (None, None) => return Err(field("plan", "needs `batch_size` or `batches`")),
            _ => {}
        }
        if self.plan.num_batches == Some(0) {
            return Err(field("plan.num_batches", "must be at least 1"));
        }
        Ok(())
    }

    pub fn has_external(&self) -> bool {
        self.data.external.is_some()
            || self
                .data
                .synthetic
                .as_ref()
                .is_some_and(|s| s.external_count.is_some())
    }

    fn synthetic_spec(&self, s: &SyntheticConfig) -> SyntheticSpec {
        SyntheticSpec {
            classes: s.classes,
            dim: s.dim,
            train_per_class: s.train_per_class,
            validation_per_class: s
                .validation_per_class
                .unwrap_or(self.experiment.validation_per_class),
            test_per_class: s.test_per_class,
            separation: s.separation,
            seed: s.seed.unwrap_or(self.experiment.seed),
        }
    }

    /// Digest of everything that affects results; output location and worker
    /// count are excluded.
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        canonical.experiment.workers = 1;
        let text = toml::to_string(&canonical).expect("config serializes");
        sha256_hex(text.as_bytes())
    }

    pub fn run_id(&self) -> String {
        self.digest()[..12].to_string()
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(self.run_id())
    }

    pub fn plan(&self, dataset: &LabeledDataset) -> CliResult<BatchPlan> {
        let mut plan = match (&self.plan.batch_size, &self.plan.batches) {
            (_, Some(batches)) => BatchPlan::new(batches.clone()),
            (Some(size), None) => {
                let order = match self.plan.shuffle_seed {
                    Some(seed) => dataset.clone().shuffled_class_order(seed).class_order,
                    None => dataset.class_order.clone(),
                };
                BatchPlan::uniform(&order, *size)?
            }
            (None, None) => return Err(CliError::config("invalid parameter `plan`: no batches")),
        };
        if let Some(n) = self.plan.num_batches {
            plan.batches.truncate(n);
        }
        plan.validate(dataset).map_err(|e| CliError::config(format!("invalid parameter `plan`: {e}")))?;
        Ok(plan)
    }

    pub fn load_inputs(&self) -> CliResult<Inputs> {
        if let Some(s) = &self.data.synthetic {
            let spec = self.synthetic_spec(s);
            let data = generate_synthetic(&spec)?;
            let external = match s.external_count {
                Some(count) => Some(generate_external(&spec, s.external_concepts, count)?),
                None => None,
            };
            return Ok(Inputs {
                dataset: data.dataset,
                test: (!data.test.is_empty()).then_some(data.test),
                external,
            });
        }
        let train = self.data.train.as_ref().expect("validated");
        let format_of = |p: &Path| self.data.format.unwrap_or_else(|| FeatureFormat::from_path(p));
        let dataset = load_dataset(
            train,
            format_of(train),
            self.experiment.validation_per_class,
            self.experiment.seed,
        )?;
        let test = match &self.data.test {
            Some(p) => Some(LabeledSamples::load(p, format_of(p))?),
            None => None,
        };
        let external = match &self.data.external {
            Some(p) => Some(
                LabeledSamples::load(p, format_of(p))?
                    .samples
                    .into_iter()
                    .map(|(_, v)| v)
                    .collect(),
            ),
            None => None,
        };
        for dim in test.iter().map(|t| t.dimension) {
            if dim != dataset.dimension {
                return Err(CliError::data(format!(
                    "test features have dimension {dim}, train features {}",
                    dataset.dimension
                )));
            }
        }
        if let Some(v) = external.as_ref().and_then(|e: &Vec<FeatureVector>| e.first()) {
            if v.dim() != dataset.dimension {
                return Err(CliError::data(format!(
                    "external features have dimension {}, train features {}",
                    v.dim(),
                    dataset.dimension
                )));
            }
        }
        Ok(Inputs {
            dataset,
            test,
            external,
        })
    }
}

pub struct Inputs {
    pub dataset: LabeledDataset,
    pub test: Option<LabeledSamples>,
    pub external: Option<Vec<FeatureVector>>,
}

#[derive(Debug, Parser)]
#[command(name = "deesil", version, about = "Class-incremental learning with linear SVMs over fixed features")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the incremental protocol described by a config file.
    Run(RunArgs),
    /// Write a synthetic dataset (train, test and optional external pool).
    GenSynthetic(GenSyntheticArgs),
    /// Rebuild the negative memory for a checkpoint's classes and write a snapshot.
    SelectNegatives(SelectNegativesArgs),
    /// Top-k accuracy of a checkpoint on a feature file.
    Evaluate(EvaluateArgs),
    /// Grid search over C on the first batch of a config.
    GridsearchC(GridSearchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Continue from this state checkpoint directory.
    #[arg(long)]
    pub resume_from: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenSyntheticArgs {
    #[arg(long)]
    pub classes: usize,
    #[arg(long)]
    pub dim: usize,
    #[arg(long, default_value_t = 100)]
    pub train_per_class: usize,
    /// Extra per-class vectors in the train file, meant to be held out on load.
    #[arg(long, default_value_t = 20)]
    pub validation_per_class: usize,
    #[arg(long, default_value_t = 20)]
    pub test_per_class: usize,
    #[arg(long, default_value_t = 6.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write an external pool of this many vectors.
    #[arg(long)]
    pub external: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub external_concepts: usize,
    #[arg(long, default_value = "binary")]
    pub format: FeatureFormat,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SelectNegativesArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,5")]
    pub k: Vec<usize>,
    #[arg(long)]
    pub format: Option<FeatureFormat>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GridSearchArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Write the table here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run(args) => {
            let outcome = cmd_run(&args)?;
            println!("{}", outcome.run_dir.display());
            Ok(())
        }
        Command::GenSynthetic(args) => cmd_gen_synthetic(&args),
        Command::SelectNegatives(args) => cmd_select_negatives(&args).map(|_| ()),
        Command::Evaluate(args) => {
            let csv = cmd_evaluate(&args)?;
            if args.out.is_none() {
                print!("{csv}");
            }
            Ok(())
        }
        Command::GridsearchC(args) => {
            let csv = cmd_gridsearch_c(&args)?;
            if args.out.is_none() {
                print!("{csv}");
            }
            Ok(())
        }
    }
}

pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub reports: Vec<EvalReport>,
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::from(Error::io(path, e)))
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::from(Error::io(path, e)))
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Runs the protocol and writes `<output_dir>/<run-id>/` with `manifest.txt`,
/// `config.toml`, `states/<s>/` checkpoints and `reports/`.
pub fn cmd_run(args: &RunArgs) -> CliResult<RunOutcome> {
    let config = RunConfig::load(&args.config)?;
    let inputs = config.load_inputs()?;
    let plan = config.plan(&inputs.dataset)?;

    let run_dir = config.run_dir();
    let states_dir = run_dir.join("states");
    let reports_dir = run_dir.join("reports");
    create_dir(&states_dir)?;
    create_dir(&reports_dir)?;
    let started = unix_now();

    let (resume, mut previous) = match &args.resume_from {
        Some(dir) => {
            let checkpoint = load_checkpoint(dir)?;
            if checkpoint.seed != config.experiment.seed {
                return Err(CliError::config(format!(
                    "invalid parameter `seed`: checkpoint was written with seed {}",
                    checkpoint.seed
                )));
            }
            let kept = previous_reports(&reports_dir.join("report.csv"), checkpoint.state.index);
            (Some(checkpoint.state), kept)
        }
        None => (None, Vec::new()),
    };

    let mut state_dirs = Vec::new();
    let seed = config.experiment.seed;
    let (reports, grid) = run_protocol_with(
        &inputs.dataset,
        &plan,
        &config.experiment,
        inputs.external.as_deref(),
        inputs.test.as_ref(),
        resume,
        |state, _| {
            let dir = states_dir.join(state.index.to_string());
            save_checkpoint(state, seed, &dir)?;
            state_dirs.push((state.index, dir));
            Ok(())
        },
    )?;
    previous.extend(reports);
    let reports = previous;

    let mut timings = String::from("state,wall_time\n");
    for r in &reports {
        timings.push_str(&format!("{},{:.3}\n", r.state_index, r.wall_time));
    }
    write_file(&reports_dir.join("timings.csv"), timings)?;
    let published: Vec<EvalReport> = reports
        .iter()
        .cloned()
        .map(|mut r| {
            if !config.record_wall_time {
                r.wall_time = 0.0;
            }
            r
        })
        .collect();
    emit_report(&published, &reports_dir.join("report.csv"))?;
    if let Some(grid) = &grid {
        write_grid_table(grid, &reports_dir.join("grid.csv"))?;
    }

    write_file(
        &run_dir.join("config.toml"),
        toml::to_string(&config).expect("config serializes"),
    )?;
    let mut manifest = format!(
        "run_id={}\nconfig_sha256={}\nversion={}\nseed={}\nstrategy={}\nmemory_budget={}\nstarted={}\nfinished={}\n",
        config.run_id(),
        config.digest(),
        env!("CARGO_PKG_VERSION"),
        seed,
        config.experiment.strategy,
        config.experiment.memory_budget,
        started,
        unix_now(),
    );
    for (index, dir) in &state_dirs {
        let rel = dir.strip_prefix(&run_dir).unwrap_or(dir);
        manifest.push_str(&format!("state_{index}={}\n", rel.display()));
    }
    write_file(&run_dir.join("manifest.txt"), manifest)?;

    Ok(RunOutcome { run_dir, reports })
}

fn previous_reports(path: &Path, up_to: u32) -> Vec<EvalReport> {
    parse_report(path)
        .unwrap_or_default()
        .into_iter()
        .filter(|r| r.state <= up_to)
        .map(|r| EvalReport {
            state_index: r.state,
            known_class_count: r.classes,
            top1: r.top1,
            top5: r.top5,
            per_class_accuracy: Default::default(),
            wall_time: r.wall_time,
        })
        .collect()
}

/// Writes `train`, `test` and optionally `external` feature files into `out`.
/// The train file carries `train_per_class + validation_per_class` vectors per
/// class; the loader holds out the validation part.
pub fn cmd_gen_synthetic(args: &GenSyntheticArgs) -> CliResult<()> {
    let spec = SyntheticSpec {
        classes: args.classes,
        dim: args.dim,
        train_per_class: args.train_per_class,
        validation_per_class: args.validation_per_class,
        test_per_class: args.test_per_class,
        separation: args.separation,
        seed: args.seed,
    };
    spec.validate()?;
    let data = generate_synthetic(&spec)?;
    create_dir(&args.out)?;
    let ext = match args.format {
        FeatureFormat::Binary => "dsf",
        FeatureFormat::Csv => "csv",
    };

    data.dataset
        .to_file()
        .write(&args.out.join(format!("train.{ext}")), args.format)?;
    data.test
        .to_file()
        .write(&args.out.join(format!("test.{ext}")), args.format)?;
    if let Some(count) = args.external {
        let pool = generate_external(&spec, args.external_concepts, count)?;
        let mut file = FeatureFile::new(spec.dim);
        for (i, v) in pool.iter().enumerate() {
            file.push((i % args.external_concepts) as i32, v.as_slice());
        }
        file.write(&args.out.join(format!("external.{ext}")), args.format)?;
    }
    Ok(())
}

/// Rebuilds the memory with the configured strategy over the checkpoint's
/// classes and writes the snapshot to `args.out`.
pub fn cmd_select_negatives(args: &SelectNegativesArgs) -> CliResult<PathBuf> {
    let config = RunConfig::load(&args.config)?;
    let checkpoint = load_checkpoint(&args.checkpoint)?;
    let inputs = config.load_inputs()?;
    let mut engine_config = EngineConfig::from_experiment(&config.experiment);
    if let Some(seed) = args.seed {
        engine_config.seed = seed;
    }
    let mut engine = Engine::new(&inputs.dataset, engine_config)?;
    if let Some(pool) = inputs.external.as_deref() {
        engine = engine.with_external(pool);
    }
    let memory = engine.build_memory(&checkpoint.state.known_classes, checkpoint.state.index)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    memory.write_snapshot(&args.out)?;
    Ok(args.out.clone())
}

/// CSV with header `state,classes,top{k}...` and one row.
pub fn cmd_evaluate(args: &EvaluateArgs) -> CliResult<String> {
    if args.k.is_empty() || args.k.contains(&0) {
        return Err(CliError::config("invalid parameter `k`: values must be at least 1"));
    }
    let checkpoint = load_checkpoint(&args.checkpoint)?;
    let format = args
        .format
        .unwrap_or_else(|| FeatureFormat::from_path(&args.features));
    let samples = LabeledSamples::load(&args.features, format)?;
    let state = &checkpoint.state;
    if let Some(dim) = state.dimension() {
        if dim != samples.dimension {
            return Err(CliError::data(format!(
                "features have dimension {}, classifiers {dim}",
                samples.dimension
            )));
        }
    }
    if let Some((id, _)) = samples.samples.iter().find(|(id, _)| !state.knows(*id)) {
        return Err(CliError::data(format!(
            "evaluation set contains class {id}, unknown to state {}",
            state.index
        )));
    }
    let accuracies = topk_accuracies(state, &samples, &args.k)?;

    let mut csv = String::from("state,classes");
    for k in &args.k {
        csv.push_str(&format!(",top{k}"));
    }
    csv.push('\n');
    csv.push_str(&format!("{},{}", state.index, state.class_count()));
    for a in accuracies {
        csv.push_str(&format!(",{a:.6}"));
    }
    csv.push('\n');
    if let Some(out) = &args.out {
        write_file(out, &csv)?;
    }
    Ok(csv)
}

/// Grid search over the config's `c_grid` on its first batch.
pub fn cmd_gridsearch_c(args: &GridSearchArgs) -> CliResult<String> {
    let config = RunConfig::load(&args.config)?;
    let inputs = config.load_inputs()?;
    let plan = config.plan(&inputs.dataset)?;
    let mut engine = Engine::new(&inputs.dataset, EngineConfig::from_experiment(&config.experiment))?;
    if let Some(pool) = inputs.external.as_deref() {
        engine = engine.with_external(pool);
    }
    let first = &plan.batches[0];
    let memory = engine.build_memory(first, 0)?;
    let search = eval::grid_search_c(&engine, first, &memory, &config.experiment.c_grid)?;
    let mut csv = String::from("c,val_top1\n");
    for (c, acc) in &search.table {
        csv.push_str(&format!("{c},{acc:.6}\n"));
    }
    if let Some(out) = &args.out {
        write_grid_table(&search, out)?;
    }
    Ok(csv)
}
