//! The bounded negative memory and the strategies that fill it.
//!
//! * `ind`: a fixed external pool, the first `K` vectors, never refreshed.
//! * `rand`: per class, a seeded uniform sample of its quota.
//! * `div`: per class, the quota picked by greedy diversification.
//!
//! With `y` known classes each class gets `⌊K/y⌋` slots, the `K mod y`
//! leftover slots going to the lowest class ids. When `y > K` only `K`
//! classes get a single slot each, chosen by the strategy.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    dot_f32, dot_mixed, l2_normalize, ClassFeatures, ClassId, FeatureFile, FeatureFormat,
    FeatureVector, ZERO_NORM_FLOOR,
};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Ind,
    Rand,
    Div,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Ind, Strategy::Rand, Strategy::Div];
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ind" => Ok(Strategy::Ind),
            "rand" => Ok(Strategy::Rand),
            "div" => Ok(Strategy::Div),
            other => Err(Error::invalid("strategy", format!("unknown strategy `{other}`"))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Ind => "ind",
            Strategy::Rand => "rand",
            Strategy::Div => "div",
        })
    }
}

/// Where a memory entry came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Provenance {
    Class(ClassId),
    External,
}

impl Provenance {
    pub const EXTERNAL_ID: i32 = -1;

    pub fn to_disk(self) -> i32 {
        match self {
            Provenance::Class(id) => id as i32,
            Provenance::External => Self::EXTERNAL_ID,
        }
    }

    pub fn from_disk(id: i32) -> Result<Self> {
        match id {
            Self::EXTERNAL_ID => Ok(Provenance::External),
            id if id >= 0 => Ok(Provenance::Class(id as ClassId)),
            other => Err(Error::format(None, format!("invalid provenance id {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryEntry {
    pub provenance: Provenance,
    pub vector: FeatureVector,
}

/// The negative pool shared by every classifier trained in one state.
#[derive(Debug, Clone, PartialEq)]
pub struct NegativeMemory {
    pub budget: usize,
    pub strategy: Strategy,
    pub state_index: u32,
    entries: Vec<MemoryEntry>,
}

impl NegativeMemory {
    pub fn new(
        budget: usize,
        strategy: Strategy,
        state_index: u32,
        entries: Vec<MemoryEntry>,
    ) -> Result<Self> {
        if entries.len() > budget {
            return Err(Error::invalid(
                "memory_budget",
                format!("{} entries exceed the budget of {budget}", entries.len()),
            ));
        }
        Ok(Self {
            budget,
            strategy,
            state_index,
            entries,
        })
    }

    pub fn entries(&self) -> &[MemoryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn counts(&self) -> BTreeMap<Provenance, usize> {
        let mut out = BTreeMap::new();
        for e in &self.entries {
            *out.entry(e.provenance).or_insert(0) += 1;
        }
        out
    }

    /// Memory with the class's own representatives removed.
    pub fn negatives_for_class(&self, class_id: ClassId) -> Vec<&FeatureVector> {
        self.entries
            .iter()
            .filter(|e| e.provenance != Provenance::Class(class_id))
            .map(|e| &e.vector)
            .collect()
    }

    pub fn with_state_index(mut self, state_index: u32) -> Self {
        self.state_index = state_index;
        self
    }

    /// Snapshot in the feature-file layout, provenance in the class id slot.
    pub fn to_file(&self) -> FeatureFile {
        let dim = self.entries.first().map_or(0, |e| e.vector.dim());
        let mut file = FeatureFile::new(dim);
        for e in &self.entries {
            file.push(e.provenance.to_disk(), e.vector.as_slice());
        }
        file
    }

    pub fn from_file(
        file: FeatureFile,
        budget: usize,
        strategy: Strategy,
        state_index: u32,
    ) -> Result<Self> {
        let entries = file
            .records
            .into_iter()
            .enumerate()
            .map(|(index, r)| {
                let provenance = Provenance::from_disk(r.class_id)
                    .map_err(|e| Error::format(Some(index), e.to_string()))?;
                let vector = FeatureVector::new(r.values)
                    .map_err(|e| Error::format(Some(index), e.to_string()))?;
                Ok(MemoryEntry { provenance, vector })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(budget, strategy, state_index, entries)
    }

    /// Writes the snapshot. An empty memory has no dimension and is written with d = 1.
    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        let mut file = self.to_file();
        if file.dimension == 0 {
            file.dimension = 1;
        }
        file.write(path, FeatureFormat::Binary)
    }

    pub fn read_snapshot(
        path: &Path,
        budget: usize,
        strategy: Strategy,
        state_index: u32,
    ) -> Result<Self> {
        let file = FeatureFile::read(path, FeatureFormat::Binary)?;
        Self::from_file(file, budget, strategy, state_index)
    }
}

/// Per-class slot counts for one memory update.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Quota {
    pub budget: usize,
    pub base: usize,
    pub remainder: usize,
    pub per_class: BTreeMap<ClassId, usize>,
}

impl Quota {
    pub fn total(&self) -> usize {
        self.per_class.values().sum()
    }

    pub fn get(&self, class_id: ClassId) -> usize {
        self.per_class.get(&class_id).copied().unwrap_or(0)
    }
}

/// How to pick the represented classes when there are more classes than slots.
#[derive(Debug, Clone, Copy)]
pub enum ClassSubset<'a> {
    Random { seed: u64 },
    Diverse { means: &'a [(ClassId, FeatureVector)] },
}

/// Splits `budget` slots over the known classes.
///
/// Quotas are capped at each class's available count and the shortfall is
/// left unfilled, so the total may be below `budget`.
pub fn compute_quota(
    known: &[(ClassId, usize)],
    budget: usize,
    subset: ClassSubset<'_>,
) -> Result<Quota> {
    if budget == 0 {
        return Err(Error::invalid("memory_budget", "must be at least 1"));
    }
    let mut known = known.to_vec();
    known.sort_by_key(|&(id, _)| id);
    if let Some(pair) = known.windows(2).find(|p| p[0].0 == p[1].0) {
        return Err(Error::DuplicateClass(pair[0].0));
    }
    let y = known.len();
    if y == 0 {
        return Ok(Quota {
            budget,
            base: 0,
            remainder: 0,
            per_class: BTreeMap::new(),
        });
    }
    let base = budget / y;
    let remainder = budget % y;

    let mut per_class: BTreeMap<ClassId, usize> = known.iter().map(|&(id, _)| (id, base)).collect();
    if y <= budget {
        for &(id, _) in known.iter().take(remainder) {
            *per_class.get_mut(&id).expect("known class") += 1;
        }
    } else {
        for id in pick_class_subset(&known, budget, subset)? {
            *per_class.get_mut(&id).expect("known class") = 1;
        }
    }
    for &(id, available) in &known {
        let slot = per_class.get_mut(&id).expect("known class");
        *slot = (*slot).min(available);
    }
    Ok(Quota {
        budget,
        base,
        remainder,
        per_class,
    })
}

fn pick_class_subset(
    known: &[(ClassId, usize)],
    count: usize,
    subset: ClassSubset<'_>,
) -> Result<Vec<ClassId>> {
    match subset {
        ClassSubset::Random { seed } => {
            let mut rng = seed::rng(seed, seed::stream::CLASS_SUBSET, &[]);
            let mut picked: Vec<ClassId> = rand::seq::index::sample(&mut rng, known.len(), count)
                .into_iter()
                .map(|i| known[i].0)
                .collect();
            picked.sort_unstable();
            Ok(picked)
        }
        ClassSubset::Diverse { means } => {
            let mut means: Vec<(ClassId, FeatureVector)> = means
                .iter()
                .filter(|(id, _)| known.binary_search_by_key(id, |&(k, _)| k).is_ok())
                .cloned()
                .collect();
            means.sort_by_key(|(id, _)| *id);
            if means.len() != known.len() {
                return Err(Error::invalid("class_means", "a mean is required for every known class"));
            }
            diversify_classes(&means, count)
        }
    }
}

/// Greedy diversification.
///
/// The first pick is the item most similar to the normalized mean of all
/// items; every following pick is the remaining item with the lowest mean
/// dot-product similarity to the picks so far. Ties go to the lowest index.
/// Returns indices in pick order.
pub fn greedy_diversify<V: AsRef<[f32]>>(items: &[V], n: usize) -> Result<Vec<usize>> {
    if items.is_empty() {
        return Err(Error::EmptyInput("greedy diversification over no items"));
    }
    if n > items.len() {
        return Err(Error::invalid(
            "n",
            format!("cannot pick {n} of {} items", items.len()),
        ));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let dim = items[0].as_ref().len();
    let mut mean = vec![0f64; dim];
    for item in items {
        for (m, &x) in mean.iter_mut().zip(item.as_ref()) {
            *m += x as f64;
        }
    }
    let count = items.len() as f64;
    for m in mean.iter_mut() {
        *m /= count;
    }
    let norm = mean.iter().map(|m| m * m).sum::<f64>().sqrt();
    if norm > ZERO_NORM_FLOOR {
        for m in mean.iter_mut() {
            *m /= norm;
        }
    }

    let mut first = 0;
    let mut best = f64::NEG_INFINITY;
    for (i, item) in items.iter().enumerate() {
        let s = dot_mixed(item.as_ref(), &mean);
        if s > best {
            best = s;
            first = i;
        }
    }

    let mut picked = Vec::with_capacity(n);
    let mut taken = vec![false; items.len()];
    // Running sum of similarities to the picks, accumulated in pick order.
    let mut similarity = vec![0f64; items.len()];
    let mut next = first;
    loop {
        picked.push(next);
        taken[next] = true;
        if picked.len() == n {
            break;
        }
        let anchor = items[next].as_ref();
        for (i, item) in items.iter().enumerate() {
            if !taken[i] {
                similarity[i] += dot_f32(item.as_ref(), anchor);
            }
        }
        let k = picked.len() as f64;
        let mut lowest = f64::INFINITY;
        for i in 0..items.len() {
            if !taken[i] && similarity[i] / k < lowest {
                lowest = similarity[i] / k;
                next = i;
            }
        }
    }
    Ok(picked)
}

/// Greedy diversification over class means; returns class ids in pick order.
pub fn diversify_classes(class_means: &[(ClassId, FeatureVector)], n: usize) -> Result<Vec<ClassId>> {
    if class_means.is_empty() {
        return Err(Error::EmptyInput("no class means"));
    }
    let normalized = class_means
        .iter()
        .map(|(_, m)| l2_normalize(m))
        .collect::<Result<Vec<_>>>()?;
    Ok(greedy_diversify(&normalized, n)?
        .into_iter()
        .map(|i| class_means[i].0)
        .collect())
}

fn class_entries(class: &ClassFeatures, mut indices: Vec<usize>) -> impl Iterator<Item = MemoryEntry> + '_ {
    indices.sort_unstable();
    indices.into_iter().map(move |i| MemoryEntry {
        provenance: Provenance::Class(class.class_id),
        vector: class.train[i].clone(),
    })
}

fn view_by_id<'a>(view: &[&'a ClassFeatures]) -> BTreeMap<ClassId, &'a ClassFeatures> {
    view.iter().map(|c| (c.class_id, *c)).collect()
}

/// Seeded uniform sample without replacement of each class's quota.
/// Entries are ordered by class id, then by position in the class.
pub fn select_rand(view: &[&ClassFeatures], quota: &Quota, seed: u64) -> NegativeMemory {
    let mut entries = Vec::with_capacity(quota.total());
    for (id, class) in view_by_id(view) {
        let take = quota.get(id).min(class.train.len());
        if take == 0 {
            continue;
        }
        let mut rng = seed::rng(seed, seed::stream::RAND_SELECT, &[id as u64]);
        let picks = rand::seq::index::sample(&mut rng, class.train.len(), take).into_vec();
        entries.extend(class_entries(class, picks));
    }
    NegativeMemory {
        budget: quota.budget,
        strategy: Strategy::Rand,
        state_index: 0,
        entries,
    }
}

/// Per class, the quota chosen by [`greedy_diversify`]. No randomness.
pub fn select_div(view: &[&ClassFeatures], quota: &Quota) -> Result<NegativeMemory> {
    let mut entries = Vec::with_capacity(quota.total());
    for (id, class) in view_by_id(view) {
        let take = quota.get(id).min(class.train.len());
        if take == 0 {
            continue;
        }
        let picks = greedy_diversify(&class.train, take)?;
        entries.extend(class_entries(class, picks));
    }
    Ok(NegativeMemory {
        budget: quota.budget,
        strategy: Strategy::Div,
        state_index: 0,
        entries,
    })
}

/// The first `budget` external vectors.
pub fn select_ind(external: &[FeatureVector], budget: usize) -> Result<NegativeMemory> {
    if external.len() < budget {
        return Err(Error::InsufficientExternal {
            available: external.len(),
            budget,
        });
    }
    Ok(NegativeMemory {
        budget,
        strategy: Strategy::Ind,
        state_index: 0,
        entries: external[..budget]
            .iter()
            .map(|v| MemoryEntry {
                provenance: Provenance::External,
                vector: v.clone(),
            })
            .collect(),
    })
}

/// Builds the memory for one state from all known classes.
///
/// `seed` is the run seed; the state index is mixed in so each state draws
/// fresh samples under `rand`.
pub fn build_memory(
    strategy: Strategy,
    known: &[&ClassFeatures],
    budget: usize,
    seed: u64,
    state_index: u32,
    external: Option<&[FeatureVector]>,
) -> Result<NegativeMemory> {
    let memory = match strategy {
        Strategy::Ind => {
            let external = external.ok_or_else(|| {
                Error::invalid("external", "the ind strategy needs an external pool")
            })?;
            select_ind(external, budget)?
        }
        Strategy::Rand => {
            let counts: Vec<(ClassId, usize)> =
                known.iter().map(|c| (c.class_id, c.train.len())).collect();
            let quota = compute_quota(
                &counts,
                budget,
                ClassSubset::Random {
                    seed: seed::derive(seed, seed::stream::CLASS_SUBSET, &[state_index as u64]),
                },
            )?;
            select_rand(
                known,
                &quota,
                seed::derive(seed, seed::stream::RAND_SELECT, &[state_index as u64]),
            )
        }
        Strategy::Div => {
            let counts: Vec<(ClassId, usize)> =
                known.iter().map(|c| (c.class_id, c.train.len())).collect();
            let means = if known.len() > budget {
                known
                    .iter()
                    .map(|c| Ok((c.class_id, c.train_mean()?)))
                    .collect::<Result<Vec<_>>>()?
            } else {
                Vec::new()
            };
            let quota = compute_quota(&counts, budget, ClassSubset::Diverse { means: &means })?;
            select_div(known, &quota)?
        }
    };
    Ok(memory.with_state_index(state_index))
}
