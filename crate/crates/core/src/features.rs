//! Feature vectors and the files they travel in.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! magic   "DSF1"        4 bytes
//! version u16 = 1       2 bytes
//! dim     u32           4 bytes
//! count   u64           8 bytes
//! count × (class_id i32, dim × f32)
//! ```
//!
//! The CSV alternative has a `class_id,f0,...,f{d-1}` header and one record
//! per row. Both carry raw features; normalization happens on load.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub type ClassId = u32;

pub const BINARY_MAGIC: &[u8; 4] = b"DSF1";
pub const BINARY_VERSION: u16 = 1;
/// Bytes before the first record.
pub const BINARY_HEADER_LEN: usize = 4 + 2 + 4 + 8;

/// Norms below this are treated as extractor failures.
pub const ZERO_NORM_FLOOR: f64 = 1e-12;
/// Vectors whose norm is already within this distance of 1 are left as-is.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// Dense feature vector. Values are stored as `f32`, arithmetic runs in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f32>,
}

impl FeatureVector {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("feature vector has no components"));
        }
        if let Some(component) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { component });
        }
        Ok(Self { values })
    }

    pub fn from_f64(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| v as f32).collect())
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.values
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.values
    }

    pub fn dot(&self, other: &FeatureVector) -> f64 {
        dot_f32(&self.values, &other.values)
    }

    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .map(|&v| (v as f64) * (v as f64))
            .sum::<f64>()
            .sqrt()
    }

    pub fn l2_normalized(&self) -> Result<FeatureVector> {
        l2_normalize(self)
    }
}

impl AsRef<[f32]> for FeatureVector {
    fn as_ref(&self) -> &[f32] {
        &self.values
    }
}

#[inline]
pub(crate) fn dot_f32(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

#[inline]
pub(crate) fn dot_mixed(a: &[f32], w: &[f64]) -> f64 {
    a.iter().zip(w).map(|(&x, &y)| x as f64 * y).sum()
}

/// Scales `v` to unit Euclidean norm.
///
/// A vector whose norm is already within [`UNIT_NORM_TOLERANCE`] of 1 is
/// returned unchanged, which makes normalization idempotent on stored data.
pub fn l2_normalize(v: &FeatureVector) -> Result<FeatureVector> {
    let norm = v.norm();
    if norm < ZERO_NORM_FLOOR {
        return Err(Error::ZeroVector { norm });
    }
    if (norm - 1.0).abs() <= UNIT_NORM_TOLERANCE {
        return Ok(v.clone());
    }
    let values = v.values.iter().map(|&x| (x as f64 / norm) as f32).collect();
    Ok(FeatureVector { values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureFormat {
    Binary,
    Csv,
}

impl FeatureFormat {
    /// `.csv` means CSV, anything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => FeatureFormat::Csv,
            _ => FeatureFormat::Binary,
        }
    }
}

impl FromStr for FeatureFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" | "bin" => Ok(FeatureFormat::Binary),
            "csv" => Ok(FeatureFormat::Csv),
            other => Err(Error::invalid("format", format!("unknown format `{other}`"))),
        }
    }
}

impl fmt::Display for FeatureFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureFormat::Binary => f.write_str("binary"),
            FeatureFormat::Csv => f.write_str("csv"),
        }
    }
}

/// One stored record. `class_id` is signed on disk; negative ids are only
/// meaningful in memory snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub class_id: i32,
    pub values: Vec<f32>,
}

/// The raw content of a feature file.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub dimension: usize,
    pub records: Vec<FeatureRecord>,
}

impl FeatureFile {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, class_id: i32, values: &[f32]) {
        debug_assert_eq!(values.len(), self.dimension);
        self.records.push(FeatureRecord {
            class_id,
            values: values.to_vec(),
        });
    }

    pub fn read(path: &Path, format: FeatureFormat) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(file);
        match format {
            FeatureFormat::Binary => Self::read_binary(&mut reader),
            FeatureFormat::Csv => Self::read_csv(reader),
        }
    }

    pub fn write(&self, path: &Path, format: FeatureFormat) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = BufWriter::new(file);
        match format {
            FeatureFormat::Binary => self.write_binary(&mut writer),
            FeatureFormat::Csv => self.write_csv(&mut writer),
        }
        .map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })?;
        writer.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_binary<R: Read>(reader: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        reader
            .read_exact(&mut magic)
            .map_err(|_| Error::format(None, "truncated header"))?;
        if &magic != BINARY_MAGIC {
            return Err(Error::format(None, format!("bad magic {magic:?}")));
        }
        let header = |e: std::io::Error| Error::format(None, format!("truncated header: {e}"));
        let version = reader.read_u16::<LittleEndian>().map_err(header)?;
        if version != BINARY_VERSION {
            return Err(Error::format(None, format!("unsupported version {version}")));
        }
        let dimension = reader.read_u32::<LittleEndian>().map_err(header)? as usize;
        if dimension == 0 {
            return Err(Error::format(None, "dimension must be at least 1"));
        }
        let count = reader.read_u64::<LittleEndian>().map_err(header)?;
        let count = usize::try_from(count)
            .map_err(|_| Error::format(None, format!("record count {count} too large")))?;

        let mut records = Vec::with_capacity(count.min(1 << 20));
        let mut buf = vec![0f32; dimension];
        for index in 0..count {
            let truncated = |_| Error::format(Some(index), "truncated record");
            let class_id = reader.read_i32::<LittleEndian>().map_err(truncated)?;
            reader
                .read_f32_into::<LittleEndian>(&mut buf)
                .map_err(truncated)?;
            if let Some(c) = buf.iter().position(|v| !v.is_finite()) {
                return Err(Error::format(
                    Some(index),
                    format!("non-finite value at component {c}"),
                ));
            }
            records.push(FeatureRecord {
                class_id,
                values: buf.clone(),
            });
        }
        let mut probe = [0u8; 1];
        match reader.read(&mut probe) {
            Ok(0) => {}
            Ok(_) => return Err(Error::format(None, "trailing bytes after last record")),
            Err(e) => return Err(Error::format(None, format!("read error: {e}"))),
        }
        Ok(Self { dimension, records })
    }

    pub fn write_binary<W: Write>(&self, writer: &mut W) -> Result<()> {
        let io = |e| Error::io("<stream>", e);
        writer.write_all(BINARY_MAGIC).map_err(io)?;
        writer
            .write_u16::<LittleEndian>(BINARY_VERSION)
            .map_err(io)?;
        let dim = u32::try_from(self.dimension)
            .map_err(|_| Error::format(None, "dimension exceeds u32"))?;
        writer.write_u32::<LittleEndian>(dim).map_err(io)?;
        writer
            .write_u64::<LittleEndian>(self.records.len() as u64)
            .map_err(io)?;
        for (index, record) in self.records.iter().enumerate() {
            if record.values.len() != self.dimension {
                return Err(Error::format(
                    Some(index),
                    format!(
                        "record has {} values, dimension is {}",
                        record.values.len(),
                        self.dimension
                    ),
                ));
            }
            writer.write_i32::<LittleEndian>(record.class_id).map_err(io)?;
            for &v in &record.values {
                writer.write_f32::<LittleEndian>(v).map_err(io)?;
            }
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = csv
            .headers()
            .map_err(|e| Error::format(None, format!("bad CSV header: {e}")))?
            .clone();
        if headers.get(0) != Some("class_id") {
            return Err(Error::format(None, "CSV header must start with `class_id`"));
        }
        let dimension = headers.len() - 1;
        if dimension == 0 {
            return Err(Error::format(None, "CSV header declares no feature columns"));
        }
        for (i, name) in headers.iter().skip(1).enumerate() {
            if name != format!("f{i}") {
                return Err(Error::format(
                    None,
                    format!("CSV header column {} should be `f{i}`, found `{name}`", i + 1),
                ));
            }
        }

        let mut records = Vec::new();
        for (index, row) in csv.records().enumerate() {
            let row = row.map_err(|e| Error::format(Some(index), e.to_string()))?;
            if row.len() != dimension + 1 {
                return Err(Error::format(
                    Some(index),
                    format!("row has {} values, header declares {dimension}", row.len() - 1),
                ));
            }
            let class_id: i32 = row[0]
                .parse()
                .map_err(|_| Error::format(Some(index), format!("bad class id `{}`", &row[0])))?;
            let mut values = Vec::with_capacity(dimension);
            for (c, field) in row.iter().skip(1).enumerate() {
                let v: f32 = field.parse().map_err(|_| {
                    Error::format(Some(index), format!("bad value `{field}` at component {c}"))
                })?;
                if !v.is_finite() {
                    return Err(Error::format(
                        Some(index),
                        format!("non-finite value at component {c}"),
                    ));
                }
                values.push(v);
            }
            records.push(FeatureRecord { class_id, values });
        }
        Ok(Self { dimension, records })
    }

    pub fn write_csv<W: Write>(&self, writer: &mut W) -> Result<()> {
        let io = |e| Error::io("<stream>", e);
        let mut header = String::from("class_id");
        for i in 0..self.dimension {
            header.push_str(&format!(",f{i}"));
        }
        writeln!(writer, "{header}").map_err(io)?;
        for (index, record) in self.records.iter().enumerate() {
            if record.values.len() != self.dimension {
                return Err(Error::format(Some(index), "record length differs from dimension"));
            }
            let mut line = record.class_id.to_string();
            for v in &record.values {
                // `{}` on f32 prints the shortest string that parses back to the same bits.
                line.push(',');
                line.push_str(&v.to_string());
            }
            writeln!(writer, "{line}").map_err(io)?;
        }
        Ok(())
    }

    /// Normalizes every record, returning `(class_id, vector)` pairs in file order.
    pub fn into_normalized(self) -> Result<Vec<(i32, FeatureVector)>> {
        self.records
            .into_iter()
            .enumerate()
            .map(|(index, r)| {
                let v = FeatureVector::new(r.values)
                    .map_err(|e| Error::format(Some(index), e.to_string()))?;
                let v = l2_normalize(&v)
                    .map_err(|e| Error::format(Some(index), e.to_string()))?;
                Ok((r.class_id, v))
            })
            .collect()
    }
}

/// All vectors of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassFeatures {
    pub class_id: ClassId,
    pub train: Vec<FeatureVector>,
    pub validation: Vec<FeatureVector>,
}

impl ClassFeatures {
    pub fn new(class_id: ClassId, train: Vec<FeatureVector>, validation: Vec<FeatureVector>) -> Self {
        Self {
            class_id,
            train,
            validation,
        }
    }

    /// Normalized mean of the train partition.
    pub fn train_mean(&self) -> Result<FeatureVector> {
        mean_vector(&self.train)
    }
}

pub(crate) fn mean_vector(items: &[FeatureVector]) -> Result<FeatureVector> {
    let first = items.first().ok_or(Error::EmptyInput("mean of no vectors"))?;
    let mut acc = vec![0f64; first.dim()];
    for v in items {
        for (a, &x) in acc.iter_mut().zip(v.as_slice()) {
            *a += x as f64;
        }
    }
    let n = items.len() as f64;
    let mean = FeatureVector::from_f64(&acc.iter().map(|a| a / n).collect::<Vec<_>>())?;
    l2_normalize(&mean)
}

/// Labeled vectors without a train/validation split (test sets, external pools).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSamples {
    pub dimension: usize,
    pub samples: Vec<(ClassId, FeatureVector)>,
}

impl LabeledSamples {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn vectors(&self) -> impl Iterator<Item = &FeatureVector> {
        self.samples.iter().map(|(_, v)| v)
    }

    /// Loads and normalizes every record. Negative class ids are rejected.
    pub fn load(path: &Path, format: FeatureFormat) -> Result<Self> {
        let file = FeatureFile::read(path, format)?;
        let dimension = file.dimension;
        let samples = file
            .into_normalized()?
            .into_iter()
            .enumerate()
            .map(|(index, (id, v))| Ok((class_id_from_disk(id, index)?, v)))
            .collect::<Result<_>>()?;
        Ok(Self { dimension, samples })
    }

    pub fn to_file(&self) -> FeatureFile {
        let mut file = FeatureFile::new(self.dimension);
        for (id, v) in &self.samples {
            file.push(*id as i32, v.as_slice());
        }
        file
    }
}

fn class_id_from_disk(id: i32, index: usize) -> Result<ClassId> {
    ClassId::try_from(id)
        .map_err(|_| Error::format(Some(index), format!("negative class id {id}")))
}

/// Classes with their train/validation partitions.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub dimension: usize,
    /// Sorted by ascending class id.
    classes: Vec<ClassFeatures>,
    /// Order in which classes are fed to the incremental protocol.
    pub class_order: Vec<ClassId>,
}

impl LabeledDataset {
    /// Validates and sorts the classes; the class order defaults to ascending ids.
    pub fn new(dimension: usize, mut classes: Vec<ClassFeatures>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::invalid("dimension", "must be at least 1"));
        }
        classes.sort_by_key(|c| c.class_id);
        for pair in classes.windows(2) {
            if pair[0].class_id == pair[1].class_id {
                return Err(Error::DuplicateClass(pair[0].class_id));
            }
        }
        for class in &classes {
            if class.train.is_empty() {
                return Err(Error::EmptyClass(format!("class {} has no train vectors", class.class_id)));
            }
            for v in class.train.iter().chain(&class.validation) {
                if v.dim() != dimension {
                    return Err(Error::DimensionMismatch {
                        expected: dimension,
                        actual: v.dim(),
                    });
                }
            }
        }
        let class_order = classes.iter().map(|c| c.class_id).collect();
        Ok(Self {
            dimension,
            classes,
            class_order,
        })
    }

    pub fn classes(&self) -> &[ClassFeatures] {
        &self.classes
    }

    pub fn class(&self, id: ClassId) -> Option<&ClassFeatures> {
        self.classes
            .binary_search_by_key(&id, |c| c.class_id)
            .ok()
            .map(|i| &self.classes[i])
    }

    pub fn class_ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.classes.iter().map(|c| c.class_id)
    }

    pub fn total_train(&self) -> usize {
        self.classes.iter().map(|c| c.train.len()).sum()
    }

    /// Replaces the class order; `order` must be a permutation of the class ids.
    pub fn with_class_order(mut self, order: Vec<ClassId>) -> Result<Self> {
        let mut sorted = order.clone();
        sorted.sort_unstable();
        if !sorted.iter().copied().eq(self.class_ids()) {
            return Err(Error::invalid("class_order", "not a permutation of the dataset classes"));
        }
        self.class_order = order;
        Ok(self)
    }

    /// Seeded shuffle of the class order.
    pub fn shuffled_class_order(self, seed: u64) -> Self {
        let mut order: Vec<ClassId> = self.class_ids().collect();
        order.shuffle(&mut seed::rng(seed, seed::stream::CLASS_ORDER, &[]));
        self.with_class_order(order).expect("permutation of own classes")
    }

    /// Validation partitions of all classes, pooled.
    pub fn validation_samples(&self) -> LabeledSamples {
        LabeledSamples {
            dimension: self.dimension,
            samples: self
                .classes
                .iter()
                .flat_map(|c| c.validation.iter().map(move |v| (c.class_id, v.clone())))
                .collect(),
        }
    }

    /// Splits normalized records into classes. For each class the record
    /// positions are shuffled with a class-specific stream and the first
    /// `validation_per_class` become validation; both partitions keep file order.
    pub fn from_records(
        dimension: usize,
        records: Vec<(ClassId, FeatureVector)>,
        validation_per_class: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut by_class: BTreeMap<ClassId, Vec<FeatureVector>> = BTreeMap::new();
        for (id, v) in records {
            by_class.entry(id).or_default().push(v);
        }
        let mut classes = Vec::with_capacity(by_class.len());
        for (class_id, vectors) in by_class {
            if vectors.len() <= validation_per_class {
                return Err(Error::InsufficientSamples {
                    class_id,
                    available: vectors.len(),
                    required: validation_per_class,
                });
            }
            let mut held_out = vec![false; vectors.len()];
            if validation_per_class > 0 {
                let mut positions: Vec<usize> = (0..vectors.len()).collect();
                positions.shuffle(&mut seed::rng(seed, seed::stream::SPLIT, &[class_id as u64]));
                for &p in &positions[..validation_per_class] {
                    held_out[p] = true;
                }
            }
            let (mut train, mut validation) = (Vec::new(), Vec::new());
            for (v, out) in vectors.into_iter().zip(held_out) {
                if out {
                    validation.push(v);
                } else {
                    train.push(v);
                }
            }
            classes.push(ClassFeatures::new(class_id, train, validation));
        }
        Self::new(dimension, classes)
    }

    /// Records in write order: per class (ascending id) train then validation.
    pub fn to_file(&self) -> FeatureFile {
        let mut file = FeatureFile::new(self.dimension);
        for class in &self.classes {
            for v in class.train.iter().chain(&class.validation) {
                file.push(class.class_id as i32, v.as_slice());
            }
        }
        file
    }
}

/// Reads a feature file, normalizes every vector and splits each class.
/// `validation_per_class = 0` keeps every record in train.
pub fn load_dataset(
    path: &Path,
    format: FeatureFormat,
    validation_per_class: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    let file = FeatureFile::read(path, format)?;
    dataset_from_file(file, validation_per_class, seed)
}

pub fn dataset_from_file(
    file: FeatureFile,
    validation_per_class: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    let dimension = file.dimension;
    let records = file
        .into_normalized()?
        .into_iter()
        .enumerate()
        .map(|(index, (id, v))| Ok((class_id_from_disk(id, index)?, v)))
        .collect::<Result<Vec<_>>>()?;
    if records.is_empty() {
        return Err(Error::format(None, "file holds no records"));
    }
    LabeledDataset::from_records(dimension, records, validation_per_class, seed)
}

pub fn write_dataset(dataset: &LabeledDataset, path: &Path, format: FeatureFormat) -> Result<()> {
    if dataset.classes.is_empty() {
        return Err(Error::format(None, "dataset has no classes"));
    }
    dataset.to_file().write(path, format)
}
