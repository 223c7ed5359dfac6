//! The incremental protocol: state transitions, top-k prediction and
//! checkpoints.
//!
//! Moving from a state with `y` classes to one with `y + j` classes takes
//! three steps: the features of the `j` new classes are already loaded, the
//! negative memory is rebuilt over all known classes, and `j` classifiers are
//! trained against it. Classifiers from earlier states are carried over
//! untouched unless `retrain_all` is set.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{self, EvalReport, ExperimentConfig, GridSearch};
use crate::features::{ClassFeatures, ClassId, FeatureVector, LabeledDataset, LabeledSamples};
use crate::memory::{build_memory, NegativeMemory, Strategy};
use crate::seed;
use crate::svm::{train_svm, LinearClassifier, SolverConfig};

/// The system after some number of class batches.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementalState {
    pub index: u32,
    /// In order of arrival.
    pub known_classes: Vec<ClassId>,
    pub classifiers: BTreeMap<ClassId, LinearClassifier>,
    pub memory: NegativeMemory,
    pub c_value: f64,
}

impl IncrementalState {
    pub fn class_count(&self) -> usize {
        self.known_classes.len()
    }

    pub fn dimension(&self) -> Option<usize> {
        self.classifiers.values().next().map(LinearClassifier::dim)
    }

    pub fn knows(&self, class_id: ClassId) -> bool {
        self.classifiers.contains_key(&class_id)
    }
}

/// Ordered class batches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPlan {
    pub batches: Vec<Vec<ClassId>>,
}

impl BatchPlan {
    pub fn new(batches: Vec<Vec<ClassId>>) -> Self {
        Self { batches }
    }

    /// Consecutive batches of `batch_size` over `order`; the last may be shorter.
    pub fn uniform(order: &[ClassId], batch_size: usize) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be at least 1"));
        }
        Ok(Self {
            batches: order.chunks(batch_size).map(<[ClassId]>::to_vec).collect(),
        })
    }

    pub fn validate(&self, dataset: &LabeledDataset) -> Result<()> {
        if self.batches.is_empty() {
            return Err(Error::invalid("plan", "no batches"));
        }
        let mut seen = BTreeSet::new();
        for id in self.batches.iter().flatten() {
            if dataset.class(*id).is_none() {
                return Err(Error::UnknownClass(*id));
            }
            if !seen.insert(*id) {
                return Err(Error::DuplicateClass(*id));
            }
        }
        Ok(())
    }
}

/// Settings shared by every transition of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub memory_budget: usize,
    pub strategy: Strategy,
    pub seed: u64,
    /// `c` is ignored; each state carries its own.
    pub solver: SolverConfig,
    pub workers: usize,
    pub retrain_all: bool,
}

impl EngineConfig {
    pub fn from_experiment(config: &ExperimentConfig) -> Self {
        Self {
            memory_budget: config.memory_budget,
            strategy: config.strategy,
            seed: config.seed,
            solver: config.solver,
            workers: config.workers,
            retrain_all: config.retrain_all,
        }
    }
}

/// Solver seed for a class's classifier; independent of state and data order.
pub fn solver_seed(run_seed: u64, class_id: ClassId) -> u64 {
    seed::derive(run_seed, seed::stream::SOLVER, &[class_id as u64])
}

pub struct Engine<'a> {
    dataset: &'a LabeledDataset,
    external: Option<&'a [FeatureVector]>,
    config: EngineConfig,
    pool: rayon::ThreadPool,
}

impl<'a> Engine<'a> {
    pub fn new(dataset: &'a LabeledDataset, config: EngineConfig) -> Result<Self> {
        if config.memory_budget == 0 {
            return Err(Error::invalid("memory_budget", "must be at least 1"));
        }
        if config.workers == 0 {
            return Err(Error::invalid("workers", "must be at least 1"));
        }
        config.solver.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::invalid("workers", e.to_string()))?;
        Ok(Self {
            dataset,
            external: None,
            config,
            pool,
        })
    }

    pub fn with_external(mut self, pool: &'a [FeatureVector]) -> Self {
        self.external = Some(pool);
        self
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn dataset(&self) -> &'a LabeledDataset {
        self.dataset
    }

    fn class(&self, id: ClassId) -> Result<&'a ClassFeatures> {
        self.dataset.class(id).ok_or(Error::UnknownClass(id))
    }

    /// Memory for a state that knows `known`.
    pub fn build_memory(&self, known: &[ClassId], state_index: u32) -> Result<NegativeMemory> {
        let views = known
            .iter()
            .map(|&id| self.class(id))
            .collect::<Result<Vec<_>>>()?;
        build_memory(
            self.config.strategy,
            &views,
            self.config.memory_budget,
            self.config.seed,
            state_index,
            self.external,
        )
    }

    pub fn train_class(
        &self,
        class_id: ClassId,
        memory: &NegativeMemory,
        c: f64,
        state_index: u32,
    ) -> Result<LinearClassifier> {
        let class = self.class(class_id)?;
        let negatives = memory.negatives_for_class(class_id);
        if negatives.is_empty() {
            return Err(Error::EmptyClass(format!(
                "class {class_id} has no negatives once its own entries are excluded"
            )));
        }
        let config = SolverConfig {
            c,
            seed: solver_seed(self.config.seed, class_id),
            ..self.config.solver
        };
        let mut classifier = train_svm(&class.train, &negatives, &config)?;
        classifier.class_id = class_id;
        classifier.trained_in_state = state_index;
        Ok(classifier)
    }

    /// Trains the classes independently on the worker pool; results are keyed
    /// by class id, so the outcome does not depend on scheduling.
    pub fn train_classes(
        &self,
        classes: &[ClassId],
        memory: &NegativeMemory,
        c: f64,
        state_index: u32,
    ) -> Result<BTreeMap<ClassId, LinearClassifier>> {
        let trained: Vec<Result<LinearClassifier>> = self.pool.install(|| {
            classes
                .par_iter()
                .map(|&id| self.train_class(id, memory, c, state_index))
                .collect()
        });
        trained
            .into_iter()
            .map(|r| r.map(|c| (c.class_id, c)))
            .collect()
    }

    pub(crate) fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }

    /// State 0: the first batch, trained from scratch with `c`.
    pub fn initial_state(&self, batch: &[ClassId], c: f64) -> Result<IncrementalState> {
        self.transition(None, batch, c)
    }

    /// Adds `batch` to `state`, producing state `index + 1`.
    pub fn advance_state(&self, state: &IncrementalState, batch: &[ClassId]) -> Result<IncrementalState> {
        self.transition(Some(state), batch, state.c_value)
    }

    /// Like [`Engine::advance_state`] with an explicit C for the new classifiers.
    pub fn advance_state_with_c(
        &self,
        state: &IncrementalState,
        batch: &[ClassId],
        c: f64,
    ) -> Result<IncrementalState> {
        self.transition(Some(state), batch, c)
    }

    fn transition(&self, previous: Option<&IncrementalState>, batch: &[ClassId], c: f64) -> Result<IncrementalState> {
        let index = previous.map_or(0, |s| s.index + 1);
        let mut known = previous.map(|s| s.known_classes.clone()).unwrap_or_default();
        let mut fresh = BTreeSet::new();
        for &id in batch {
            self.class(id)?;
            if previous.is_some_and(|s| s.knows(id)) || !fresh.insert(id) {
                return Err(Error::DuplicateClass(id));
            }
            known.push(id);
        }

        let memory = self.build_memory(&known, index)?;
        debug_assert!(memory.len() <= self.config.memory_budget);

        let (to_train, mut classifiers) = match previous {
            Some(prev) if !self.config.retrain_all => (batch.to_vec(), prev.classifiers.clone()),
            _ => (known.clone(), BTreeMap::new()),
        };
        classifiers.extend(self.train_classes(&to_train, &memory, c, index)?);

        Ok(IncrementalState {
            index,
            known_classes: known,
            classifiers,
            memory,
            c_value: c,
        })
    }
}

/// The `k` highest-scoring classes, best first; equal scores rank the lower
/// class id first.
pub fn predict_topk(state: &IncrementalState, x: &FeatureVector, k: usize) -> Result<Vec<(ClassId, f64)>> {
    if k > state.classifiers.len() {
        return Err(Error::KTooLarge {
            k,
            known: state.classifiers.len(),
        });
    }
    let mut scores = state
        .classifiers
        .values()
        .map(|c| Ok((c.class_id, c.score(x)?)))
        .collect::<Result<Vec<_>>>()?;
    scores.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scores.truncate(k);
    Ok(scores)
}

/// Output of [`run_protocol`].
#[derive(Debug, Clone)]
pub struct ProtocolRun {
    pub states: Vec<IncrementalState>,
    pub reports: Vec<EvalReport>,
    pub grid: Option<GridSearch>,
}

/// Runs every batch of `plan` and keeps every state.
pub fn run_protocol(
    dataset: &LabeledDataset,
    plan: &BatchPlan,
    config: &ExperimentConfig,
    external: Option<&[FeatureVector]>,
    test: Option<&LabeledSamples>,
) -> Result<ProtocolRun> {
    let mut states = Vec::new();
    let (reports, grid) = run_protocol_with(dataset, plan, config, external, test, None, |state, _| {
        states.push(state.clone());
        Ok(())
    })?;
    Ok(ProtocolRun {
        states,
        reports,
        grid,
    })
}

/// Runs the plan, handing each state and its report to `observer` as soon as
/// it exists. With `resume`, batches up to and including the resumed state's
/// index are skipped.
///
/// The initial C comes from a grid search over the first batch (or the only
/// grid value). Each state is evaluated on `test` restricted to its known
/// classes, or on the pooled validation partitions when `test` is `None`.
pub fn run_protocol_with<F>(
    dataset: &LabeledDataset,
    plan: &BatchPlan,
    config: &ExperimentConfig,
    external: Option<&[FeatureVector]>,
    test: Option<&LabeledSamples>,
    resume: Option<IncrementalState>,
    mut observer: F,
) -> Result<(Vec<EvalReport>, Option<GridSearch>)>
where
    F: FnMut(&IncrementalState, &EvalReport) -> Result<()>,
{
    config.validate()?;
    plan.validate(dataset)?;
    let mut engine = Engine::new(dataset, EngineConfig::from_experiment(config))?;
    if let Some(pool) = external {
        engine = engine.with_external(pool);
    }

    let mut reports = Vec::new();
    let mut grid = None;
    let mut current = resume;
    let start_batch = current.as_ref().map_or(0, |s| s.index as usize + 1);
    if let Some(state) = &current {
        let expected: Vec<ClassId> = plan.batches[..start_batch.min(plan.batches.len())]
            .iter()
            .flatten()
            .copied()
            .collect();
        if state.known_classes != expected {
            return Err(Error::Checkpoint(format!(
                "state {} does not match the first {start_batch} batches of the plan",
                state.index
            )));
        }
    }

    for (b, batch) in plan.batches.iter().enumerate().skip(start_batch) {
        let started = Instant::now();
        let next = match &current {
            None => {
                let memory = engine.build_memory(batch, 0)?;
                let search = eval::grid_search_c(&engine, batch, &memory, &config.c_grid)?;
                log::info!("state 0: C = {} selected from {} candidates", search.best_c, search.table.len());
                let c = search.best_c;
                grid = Some(search);
                engine.initial_state(batch, c)?
            }
            Some(prev) if config.per_state_c && !batch.is_empty() => {
                let mut known = prev.known_classes.clone();
                known.extend(batch);
                let memory = engine.build_memory(&known, prev.index + 1)?;
                let search = eval::grid_search_c(&engine, batch, &memory, &config.c_grid)?;
                engine.advance_state_with_c(prev, batch, search.best_c)?
            }
            Some(prev) => engine.advance_state(prev, batch)?,
        };
        let train_time = started.elapsed().as_secs_f64();

        let eval_set = match test {
            Some(t) => restrict_samples(t, &next),
            None => validation_of(dataset, &next),
        };
        let mut report = eval::evaluate_state(&engine, &next, &eval_set)?;
        report.wall_time = train_time;
        log::info!(
            "state {} ({} classes, batch {b}): top1 {:.4} top5 {:.4} in {:.2}s",
            next.index,
            next.class_count(),
            report.top1,
            report.top5,
            train_time
        );
        observer(&next, &report)?;
        reports.push(report);
        current = Some(next);
    }
    Ok((reports, grid))
}

fn restrict_samples(samples: &LabeledSamples, state: &IncrementalState) -> LabeledSamples {
    LabeledSamples {
        dimension: samples.dimension,
        samples: samples
            .samples
            .iter()
            .filter(|(id, _)| state.knows(*id))
            .cloned()
            .collect(),
    }
}

fn validation_of(dataset: &LabeledDataset, state: &IncrementalState) -> LabeledSamples {
    LabeledSamples {
        dimension: dataset.dimension,
        samples: state
            .known_classes
            .iter()
            .filter_map(|&id| dataset.class(id))
            .flat_map(|c| c.validation.iter().map(move |v| (c.class_id, v.clone())))
            .collect(),
    }
}

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const MEMORY_FILE: &str = "memory.dsf";
pub const CLASSIFIERS_FILE: &str = "classifiers.dsc";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `memory.dsf`, `classifiers.dsc` and a `key=value` manifest with
/// content digests into `dir`.
pub fn save_checkpoint(state: &IncrementalState, seed: u64, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let memory_path = dir.join(MEMORY_FILE);
    state.memory.write_snapshot(&memory_path)?;
    let memory_bytes = fs::read(&memory_path).map_err(|e| Error::io(&memory_path, e))?;

    let mut classifier_bytes = Vec::new();
    for c in state.classifiers.values() {
        classifier_bytes.extend(c.to_bytes());
    }
    let classifiers_path = dir.join(CLASSIFIERS_FILE);
    fs::write(&classifiers_path, &classifier_bytes).map_err(|e| Error::io(&classifiers_path, e))?;

    let classes: Vec<String> = state.known_classes.iter().map(ToString::to_string).collect();
    let manifest = [
        ("state_index", state.index.to_string()),
        ("classes", classes.join(",")),
        ("c", state.c_value.to_string()),
        ("strategy", state.memory.strategy.to_string()),
        ("memory_budget", state.memory.budget.to_string()),
        ("seed", seed.to_string()),
        ("dimension", state.dimension().unwrap_or(0).to_string()),
        ("memory_sha256", sha256_hex(&memory_bytes)),
        ("classifiers_sha256", sha256_hex(&classifier_bytes)),
    ];
    let path = dir.join(MANIFEST_FILE);
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut out = BufWriter::new(file);
    for (k, v) in manifest {
        writeln!(out, "{k}={v}").map_err(|e| Error::io(&path, e))?;
    }
    out.flush().map_err(|e| Error::io(&path, e))
}

pub fn read_manifest(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Checkpoint(format!("{}:{}: expected key=value", path.display(), n + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// A checkpoint read back from disk.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub state: IncrementalState,
    pub seed: u64,
    pub manifest: BTreeMap<String, String>,
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let manifest = read_manifest(&dir.join(MANIFEST_FILE))?;
    let get = |key: &str| {
        manifest
            .get(key)
            .ok_or_else(|| Error::Checkpoint(format!("manifest lacks `{key}`")))
    };
    let parse_err = |key: &str| Error::Checkpoint(format!("manifest field `{key}` is malformed"));

    let index: u32 = get("state_index")?.parse().map_err(|_| parse_err("state_index"))?;
    let c_value: f64 = get("c")?.parse().map_err(|_| parse_err("c"))?;
    let strategy: Strategy = get("strategy")?.parse()?;
    let budget: usize = get("memory_budget")?.parse().map_err(|_| parse_err("memory_budget"))?;
    let seed: u64 = get("seed")?.parse().map_err(|_| parse_err("seed"))?;
    let classes_field = get("classes")?;
    let known_classes = if classes_field.is_empty() {
        Vec::new()
    } else {
        classes_field
            .split(',')
            .map(|s| s.parse::<ClassId>().map_err(|_| parse_err("classes")))
            .collect::<Result<Vec<_>>>()?
    };

    let memory_path = dir.join(MEMORY_FILE);
    let memory_bytes = fs::read(&memory_path).map_err(|e| Error::io(&memory_path, e))?;
    if sha256_hex(&memory_bytes) != *get("memory_sha256")? {
        return Err(Error::Checkpoint("memory snapshot digest mismatch".into()));
    }
    let classifiers_path = dir.join(CLASSIFIERS_FILE);
    let classifier_bytes = fs::read(&classifiers_path).map_err(|e| Error::io(&classifiers_path, e))?;
    if sha256_hex(&classifier_bytes) != *get("classifiers_sha256")? {
        return Err(Error::Checkpoint("classifier file digest mismatch".into()));
    }

    let memory = crate::features::FeatureFile::read_binary(&mut BufReader::new(memory_bytes.as_slice()))
        .and_then(|f| NegativeMemory::from_file(f, budget, strategy, index))?;
    let classifiers: BTreeMap<ClassId, LinearClassifier> =
        LinearClassifier::read_all(&mut classifier_bytes.as_slice())?
            .into_iter()
            .map(|c| (c.class_id, c))
            .collect();
    let listed: BTreeSet<ClassId> = known_classes.iter().copied().collect();
    if listed.len() != known_classes.len() || !listed.iter().eq(classifiers.keys()) {
        return Err(Error::Checkpoint("classifiers do not match the class list".into()));
    }

    Ok(Checkpoint {
        state: IncrementalState {
            index,
            known_classes,
            classifiers,
            memory,
            c_value,
        },
        seed,
        manifest,
    })
}
