//! Measurement: top-k accuracy, the C grid search, synthetic data and report
//! files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{Engine, IncrementalState};
use crate::error::{Error, Result};
use crate::features::{
    ClassFeatures, ClassId, FeatureVector, LabeledDataset, LabeledSamples, ZERO_NORM_FLOOR,
};
use crate::memory::{NegativeMemory, Strategy};
use crate::seed;
use crate::svm::SolverConfig;

/// One value per decade from 1e-4 to 1e3.
pub const DEFAULT_C_GRID: [f64; 8] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0];
pub const DEFAULT_MEMORY_BUDGET: usize = 20_000;
pub const DEFAULT_VALIDATION_PER_CLASS: usize = 20;

/// Protocol parameters for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub memory_budget: usize,
    pub strategy: Strategy,
    pub seed: u64,
    pub c_grid: Vec<f64>,
    pub validation_per_class: usize,
    pub solver: SolverConfig,
    pub retrain_all: bool,
    pub per_state_c: bool,
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            memory_budget: DEFAULT_MEMORY_BUDGET,
            strategy: Strategy::Rand,
            seed: 0,
            c_grid: DEFAULT_C_GRID.to_vec(),
            validation_per_class: DEFAULT_VALIDATION_PER_CLASS,
            solver: SolverConfig::default(),
            retrain_all: false,
            per_state_c: false,
            workers: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.memory_budget == 0 {
            return Err(Error::invalid("memory_budget", "must be at least 1"));
        }
        if self.c_grid.is_empty() {
            return Err(Error::invalid("c_grid", "must not be empty"));
        }
        if let Some(c) = self.c_grid.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
            return Err(Error::invalid("c_grid", format!("values must be positive, found {c}")));
        }
        if self.workers == 0 {
            return Err(Error::invalid("workers", "must be at least 1"));
        }
        let probe = SolverConfig {
            c: 1.0,
            ..self.solver
        };
        probe.validate().map_err(|e| match e {
            Error::InvalidParameter { field, message } => Error::InvalidParameter {
                field: format!("solver.{field}"),
                message,
            },
            other => other,
        })
    }
}

/// Accuracy of one state.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub state_index: u32,
    pub known_class_count: usize,
    pub top1: f64,
    /// Top-5, or top-y when fewer than five classes are known.
    pub top5: f64,
    /// Top-1 per class.
    pub per_class_accuracy: BTreeMap<ClassId, f64>,
    pub wall_time: f64,
}

/// Zero-based rank of `true_class` among all classifiers on `x`, using the
/// same ordering as [`crate::engine::predict_topk`].
pub fn rank_of(state: &IncrementalState, x: &FeatureVector, true_class: ClassId) -> Result<usize> {
    let own = state
        .classifiers
        .get(&true_class)
        .ok_or(Error::UnknownClassInEvalSet(true_class))?;
    let target = own.score(x)?;
    let mut rank = 0;
    for (&id, c) in &state.classifiers {
        let s = c.score_slice(x.as_slice());
        if s > target || (s == target && id < true_class) {
            rank += 1;
        }
    }
    Ok(rank)
}

fn ranks(state: &IncrementalState, eval_set: &LabeledSamples) -> Result<Vec<(ClassId, usize)>> {
    if let Some((id, _)) = eval_set.samples.iter().find(|(id, _)| !state.knows(*id)) {
        return Err(Error::UnknownClassInEvalSet(*id));
    }
    eval_set
        .samples
        .par_iter()
        .map(|(id, x)| Ok((*id, rank_of(state, x, *id)?)))
        .collect()
}

/// Fraction of samples whose true class is among the top `k` predictions.
pub fn topk_accuracy(state: &IncrementalState, eval_set: &LabeledSamples, k: usize) -> Result<f64> {
    if k > state.class_count() {
        return Err(Error::KTooLarge {
            k,
            known: state.class_count(),
        });
    }
    if eval_set.is_empty() {
        return Err(Error::EmptyInput("evaluation set"));
    }
    let hits = ranks(state, eval_set)?.iter().filter(|(_, r)| *r < k).count();
    Ok(hits as f64 / eval_set.len() as f64)
}

/// Top-k accuracy for several k at once.
pub fn topk_accuracies(state: &IncrementalState, eval_set: &LabeledSamples, ks: &[usize]) -> Result<Vec<f64>> {
    if let Some(&k) = ks.iter().find(|&&k| k > state.class_count()) {
        return Err(Error::KTooLarge {
            k,
            known: state.class_count(),
        });
    }
    if eval_set.is_empty() {
        return Err(Error::EmptyInput("evaluation set"));
    }
    let ranks = ranks(state, eval_set)?;
    let n = eval_set.len() as f64;
    Ok(ks
        .iter()
        .map(|&k| ranks.iter().filter(|(_, r)| *r < k).count() as f64 / n)
        .collect())
}

pub fn evaluate_state(engine: &Engine<'_>, state: &IncrementalState, eval_set: &LabeledSamples) -> Result<EvalReport> {
    if eval_set.is_empty() {
        return Err(Error::EmptyInput("evaluation set"));
    }
    let ranks = engine.install(|| ranks(state, eval_set))?;
    let k5 = state.class_count().min(5);
    let n = ranks.len() as f64;
    let mut per_class: BTreeMap<ClassId, (usize, usize)> = BTreeMap::new();
    for &(id, r) in &ranks {
        let e = per_class.entry(id).or_default();
        e.1 += 1;
        if r == 0 {
            e.0 += 1;
        }
    }
    Ok(EvalReport {
        state_index: state.index,
        known_class_count: state.class_count(),
        top1: ranks.iter().filter(|(_, r)| *r == 0).count() as f64 / n,
        top5: ranks.iter().filter(|(_, r)| *r < k5).count() as f64 / n,
        per_class_accuracy: per_class
            .into_iter()
            .map(|(id, (hit, total))| (id, hit as f64 / total as f64))
            .collect(),
        wall_time: 0.0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearch {
    pub best_c: f64,
    /// `(c, validation top-1)` in grid order.
    pub table: Vec<(f64, f64)>,
}

/// Trains the classes once per grid value and keeps the C with the best
/// top-1 on their pooled validation partitions; ties go to the smaller C.
pub fn grid_search_c(
    engine: &Engine<'_>,
    classes: &[ClassId],
    memory: &NegativeMemory,
    grid: &[f64],
) -> Result<GridSearch> {
    if grid.is_empty() {
        return Err(Error::invalid("c_grid", "must not be empty"));
    }
    let dataset = engine.dataset();
    let mut validation = Vec::new();
    for &id in classes {
        let class = dataset.class(id).ok_or(Error::UnknownClass(id))?;
        if class.validation.is_empty() {
            return Err(Error::EmptyValidation(id));
        }
        validation.extend(class.validation.iter().map(|v| (id, v.clone())));
    }
    let validation = LabeledSamples {
        dimension: dataset.dimension,
        samples: validation,
    };

    let mut table = Vec::with_capacity(grid.len());
    for &c in grid {
        let classifiers = engine.train_classes(classes, memory, c, memory.state_index)?;
        let probe = IncrementalState {
            index: memory.state_index,
            known_classes: classes.to_vec(),
            classifiers,
            memory: memory.clone(),
            c_value: c,
        };
        let accuracy = engine.install(|| topk_accuracy(&probe, &validation, 1))?;
        log::debug!("grid search: C = {c} -> validation top-1 {accuracy:.4}");
        table.push((c, accuracy));
    }
    let best_c = table
        .iter()
        .copied()
        .reduce(|best, cur| {
            if cur.1 > best.1 || (cur.1 == best.1 && cur.0 < best.0) {
                cur
            } else {
                best
            }
        })
        .map(|(c, _)| c)
        .expect("grid is non-empty");
    Ok(GridSearch { best_c, table })
}

pub fn write_grid_table(search: &GridSearch, path: &Path) -> Result<()> {
    let mut out = String::from("c,val_top1\n");
    for (c, acc) in &search.table {
        out.push_str(&format!("{c},{acc:.6}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Parameters of the synthetic generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub dim: usize,
    pub train_per_class: usize,
    #[serde(default)]
    pub validation_per_class: usize,
    pub test_per_class: usize,
    /// Ratio of the mean inter-class distance to the expected noise norm.
    pub separation: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 {
            return Err(Error::invalid("classes", "must be at least 1"));
        }
        if self.dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        if self.train_per_class == 0 {
            return Err(Error::invalid("train_per_class", "must be at least 1"));
        }
        if !(self.separation > 0.0 && self.separation.is_finite()) {
            return Err(Error::invalid("separation", "must be positive"));
        }
        Ok(())
    }

    /// Minimum angle between class means, rising from 0 towards 90 degrees
    /// with the separation.
    pub fn min_angle(&self) -> f64 {
        std::f64::consts::FRAC_PI_2 * self.separation / (self.separation + 4.0)
    }

    /// Per-coordinate noise deviation. Independent uniform unit vectors are
    /// √2 apart on average (in mean square), and the noise norm is about
    /// `σ·√d`, so the expected noise norm is `√2 / separation`.
    pub fn noise_sigma(&self) -> f64 {
        std::f64::consts::SQRT_2 / (self.separation * (self.dim as f64).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub dataset: LabeledDataset,
    pub test: LabeledSamples,
    pub means: Vec<FeatureVector>,
}

const MEAN_ATTEMPTS: usize = 10_000;

fn unit_gaussian<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > ZERO_NORM_FLOOR {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn noisy_sample<R: Rng>(rng: &mut R, mean: &[f64], sigma: f64) -> FeatureVector {
    loop {
        let v: Vec<f64> = mean
            .iter()
            .map(|m| m + sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            let normalized: Vec<f64> = v.iter().map(|x| x / norm).collect();
            return FeatureVector::from_f64(&normalized).expect("finite sample");
        }
    }
}

/// Gaussian clusters around well-separated random unit means, L2-normalized.
///
/// Means are drawn uniformly on the sphere and rejected if closer than
/// [`SyntheticSpec::min_angle`] to an accepted one. Each sample is
/// `mean + N(0, σ²I)` normalized to unit length.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = seed::rng(spec.seed, seed::stream::SYNTHETIC, &[0]);
    let min_cos = spec.min_angle().cos();
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(spec.classes);
    for _ in 0..spec.classes {
        let mut accepted = false;
        for _ in 0..MEAN_ATTEMPTS {
            let candidate = unit_gaussian(&mut rng, spec.dim);
            let far = means.iter().all(|m| {
                let cos: f64 = m.iter().zip(&candidate).map(|(a, b)| a * b).sum();
                cos <= min_cos
            });
            if far {
                means.push(candidate);
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(Error::SeparationInfeasible {
                classes: spec.classes,
                dim: spec.dim,
                min_angle_deg: spec.min_angle().to_degrees(),
            });
        }
    }

    let sigma = spec.noise_sigma();
    let mut classes = Vec::with_capacity(spec.classes);
    let mut test = Vec::with_capacity(spec.classes * spec.test_per_class);
    for (id, mean) in means.iter().enumerate() {
        let mut class_rng = seed::rng(spec.seed, seed::stream::SYNTHETIC, &[1, id as u64]);
        let mut draw = |n: usize| -> Vec<FeatureVector> {
            (0..n).map(|_| noisy_sample(&mut class_rng, mean, sigma)).collect()
        };
        let train = draw(spec.train_per_class);
        let validation = draw(spec.validation_per_class);
        test.extend(draw(spec.test_per_class).into_iter().map(|v| (id as ClassId, v)));
        classes.push(ClassFeatures::new(id as ClassId, train, validation));
    }

    Ok(SyntheticData {
        dataset: LabeledDataset::new(spec.dim, classes)?,
        test: LabeledSamples {
            dimension: spec.dim,
            samples: test,
        },
        means: means
            .iter()
            .map(|m| FeatureVector::from_f64(m).expect("finite mean"))
            .collect(),
    })
}

/// An unrelated pool of `count` vectors drawn around `concepts` fresh random
/// means with the same noise law; stands in for an external negative set.
pub fn generate_external(spec: &SyntheticSpec, concepts: usize, count: usize) -> Result<Vec<FeatureVector>> {
    spec.validate()?;
    if concepts == 0 {
        return Err(Error::invalid("external_concepts", "must be at least 1"));
    }
    let mut rng = seed::rng(spec.seed, seed::stream::SYNTHETIC, &[2]);
    let means: Vec<Vec<f64>> = (0..concepts).map(|_| unit_gaussian(&mut rng, spec.dim)).collect();
    let sigma = spec.noise_sigma();
    Ok((0..count)
        .map(|i| noisy_sample(&mut rng, &means[i % concepts], sigma))
        .collect())
}

/// Writes `state,classes,top1,top5,wall_time` to `path` and a
/// whitespace-separated copy with a `#` header next to it (`.dat`).
pub fn emit_report(reports: &[EvalReport], path: &Path) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::EmptyInput("no reports to write"));
    }
    let mut csv = String::from("state,classes,top1,top5,wall_time\n");
    let mut dat = String::from("# state classes top1 top5 wall_time\n");
    for r in reports {
        csv.push_str(&format!(
            "{},{},{:.6},{:.6},{:.3}\n",
            r.state_index, r.known_class_count, r.top1, r.top5, r.wall_time
        ));
        dat.push_str(&format!(
            "{} {} {:.6} {:.6} {:.3}\n",
            r.state_index, r.known_class_count, r.top1, r.top5, r.wall_time
        ));
    }
    let write = |p: &Path, text: &str| -> Result<()> {
        let mut f = fs::File::create(p).map_err(|e| Error::io(p, e))?;
        f.write_all(text.as_bytes()).map_err(|e| Error::io(p, e))
    };
    write(path, &csv)?;
    write(&path.with_extension("dat"), &dat)
}

/// One parsed row of a report CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub state: u32,
    pub classes: usize,
    pub top1: f64,
    pub top5: f64,
    pub wall_time: f64,
}

pub fn parse_report(path: &Path) -> Result<Vec<ReportRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some("state,classes,top1,top5,wall_time") {
        return Err(Error::format(None, "unexpected report header"));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::format(Some(i), format!("bad report row `{line}`"));
            if f.len() != 5 {
                return Err(bad());
            }
            Ok(ReportRow {
                state: f[0].parse().map_err(|_| bad())?,
                classes: f[1].parse().map_err(|_| bad())?,
                top1: f[2].parse().map_err(|_| bad())?,
                top5: f[3].parse().map_err(|_| bad())?,
                wall_time: f[4].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::EngineConfig;
    use crate::svm::LinearClassifier;

    fn constant_state(biases: &[f64], dim: usize) -> IncrementalState {
        let classifiers = biases
            .iter()
            .enumerate()
            .map(|(i, &b)| {
                (
                    i as ClassId,
                    LinearClassifier {
                        class_id: i as ClassId,
                        weights: vec![0.0; dim],
                        bias: b,
                        c_used: 1.0,
                        trained_in_state: 0,
                    },
                )
            })
            .collect();
        IncrementalState {
            index: 0,
            known_classes: (0..biases.len() as ClassId).collect(),
            classifiers,
            memory: NegativeMemory::new(1, Strategy::Rand, 0, Vec::new()).unwrap(),
            c_value: 1.0,
        }
    }

    fn samples(labels: &[ClassId]) -> LabeledSamples {
        LabeledSamples {
            dimension: 2,
            samples: labels
                .iter()
                .map(|&l| (l, FeatureVector::new(vec![0.6, 0.8]).unwrap()))
                .collect(),
        }
    }

    #[test]
    fn boundary_ranks() {
        // Class 5 is ranked sixth.
        let state = constant_state(&[6.0, 5.0, 4.0, 3.0, 2.0, 1.0, 0.0], 2);
        let set = samples(&[5]);
        assert_eq!(topk_accuracy(&state, &set, 5).unwrap(), 0.0);
        assert_eq!(topk_accuracy(&state, &set, 6).unwrap(), 1.0);
    }

    #[test]
    fn perfect_when_true_class_first() {
        let state = constant_state(&[1.0, 0.0], 2);
        let set = samples(&[0, 0, 0]);
        for k in 1..=2 {
            assert_eq!(topk_accuracy(&state, &set, k).unwrap(), 1.0);
        }
    }

    #[test]
    fn unknown_class_is_rejected() {
        let state = constant_state(&[1.0, 0.0], 2);
        assert!(matches!(
            topk_accuracy(&state, &samples(&[7]), 1),
            Err(Error::UnknownClassInEvalSet(7))
        ));
    }

    #[test]
    fn equal_scores_follow_class_id_order() {
        // With all scores equal, class c sits at rank c; uniform labels give k/y exactly.
        let y = 10;
        let state = constant_state(&vec![0.0; y], 2);
        let labels: Vec<ClassId> = (0..y as ClassId).cycle().take(500).collect();
        for k in 1..=y {
            let acc = topk_accuracy(&state, &samples(&labels), k).unwrap();
            assert!((acc - k as f64 / y as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn synthetic_is_deterministic() {
        let spec = SyntheticSpec {
            classes: 4,
            dim: 6,
            train_per_class: 5,
            validation_per_class: 2,
            test_per_class: 3,
            separation: 3.0,
            seed: 9,
        };
        let a = generate_synthetic(&spec).unwrap();
        assert_eq!(a, generate_synthetic(&spec).unwrap());
        assert_eq!(a.test.len(), 12);
        for c in a.dataset.classes() {
            assert_eq!((c.train.len(), c.validation.len()), (5, 2));
        }
    }

    #[test]
    fn infeasible_separation_is_reported() {
        let spec = SyntheticSpec {
            classes: 10,
            dim: 2,
            train_per_class: 1,
            validation_per_class: 0,
            test_per_class: 0,
            separation: 20.0,
            seed: 0,
        };
        assert!(matches!(generate_synthetic(&spec), Err(Error::SeparationInfeasible { .. })));
        assert!(SyntheticSpec { classes: 0, ..spec }.validate().is_err());
    }

    #[test]
    fn antipodal_classes_are_separated() {
        let spec = SyntheticSpec {
            classes: 2,
            dim: 1,
            train_per_class: 50,
            validation_per_class: 5,
            test_per_class: 50,
            separation: 10.0,
            seed: 1,
        };
        let data = generate_synthetic(&spec).unwrap();
        assert!(data.means[0].dot(&data.means[1]) < -0.99);
        let cfg = ExperimentConfig {
            memory_budget: 100,
            c_grid: vec![1.0],
            ..ExperimentConfig::default()
        };
        let engine = Engine::new(&data.dataset, EngineConfig::from_experiment(&cfg)).unwrap();
        let state = engine.initial_state(&[0, 1], 1.0).unwrap();
        assert_eq!(topk_accuracy(&state, &data.test, 1).unwrap(), 1.0);
    }

    #[test]
    fn grid_search_tie_prefers_smaller_c_and_singleton() {
        let spec = SyntheticSpec {
            classes: 3,
            dim: 8,
            train_per_class: 20,
            validation_per_class: 5,
            test_per_class: 0,
            separation: 20.0,
            seed: 4,
        };
        let data = generate_synthetic(&spec).unwrap();
        let cfg = ExperimentConfig {
            memory_budget: 60,
            ..ExperimentConfig::default()
        };
        let engine = Engine::new(&data.dataset, EngineConfig::from_experiment(&cfg)).unwrap();
        let memory = engine.build_memory(&[0, 1, 2], 0).unwrap();
        let single = grid_search_c(&engine, &[0, 1, 2], &memory, &[0.5]).unwrap();
        assert_eq!(single.best_c, 0.5);
        assert_eq!(single.table.len(), 1);
        // Perfectly separable: every C in this range reaches 1.0, the smallest wins.
        let search = grid_search_c(&engine, &[0, 1, 2], &memory, &[10.0, 1.0, 100.0]).unwrap();
        assert!(search.table.iter().all(|(_, a)| *a == 1.0), "{:?}", search.table);
        assert_eq!(search.best_c, 1.0);
    }

    #[test]
    fn grid_search_needs_validation() {
        let spec = SyntheticSpec {
            classes: 2,
            dim: 4,
            train_per_class: 5,
            validation_per_class: 0,
            test_per_class: 0,
            separation: 5.0,
            seed: 4,
        };
        let data = generate_synthetic(&spec).unwrap();
        let engine = Engine::new(&data.dataset, EngineConfig::from_experiment(&ExperimentConfig::default())).unwrap();
        let memory = engine.build_memory(&[0, 1], 0).unwrap();
        assert!(matches!(
            grid_search_c(&engine, &[0, 1], &memory, &[1.0]),
            Err(Error::EmptyValidation(0))
        ));
    }

    #[test]
    fn report_round_trip_and_empty_refusal() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        assert!(emit_report(&[], &path).is_err());
        assert!(!path.exists());
        let reports: Vec<EvalReport> = (0..10)
            .map(|s| EvalReport {
                state_index: s,
                known_class_count: 10 * (s as usize + 1),
                top1: 0.123456789 + s as f64 * 0.01,
                top5: 0.5 + s as f64 * 0.01,
                per_class_accuracy: BTreeMap::new(),
                wall_time: 1.5,
            })
            .collect();
        emit_report(&reports, &path).unwrap();
        let rows = parse_report(&path).unwrap();
        assert_eq!(rows.len(), 10);
        for (r, row) in reports.iter().zip(&rows) {
            assert!((r.top1 - row.top1).abs() < 5e-7);
            assert!((r.top5 - row.top5).abs() < 5e-7);
        }
        assert!(path.with_extension("dat").exists());
    }

    #[test]
    fn config_validation_names_fields() {
        let bad = ExperimentConfig {
            memory_budget: 0,
            ..ExperimentConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidParameter { field, .. }) if field == "memory_budget"));
        let bad = ExperimentConfig {
            c_grid: vec![1.0, -1.0],
            ..ExperimentConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidParameter { field, .. }) if field == "c_grid"));
    }
}
