//! Corpus ingestion, unification and stratified splitting.
//!
//! CSV schema (header required): `text,label,source`, with `label` being `0`
//! (non-hate) or `1` (hate).

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::normalize::{normalize, passes_length_filter, DEFAULT_MAX_WORDS};

pub const CSV_HEADER: [&str; 3] = ["text", "label", "source"];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("bad header: expected `text,label,source`, found {found:?}")]
    Header { found: Vec<String> },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid split fractions: {0}")]
    InvalidSplit(String),
    #[error("class {label} has {count} samples, need at least {needed} (one per split)")]
    ClassTooSmall { label: Label, count: usize, needed: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    NonHate = 0,
    Hate = 1,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Label::NonHate),
            1 => Some(Label::Hate),
            _ => None,
        }
    }

    pub fn is_hate(self) -> bool {
        self == Label::Hate
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Hate => Label::NonHate,
            Label::NonHate => Label::Hate,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Hate => "hate",
            Label::NonHate => "non_hate",
        }
    }

    pub fn parse_name(s: &str) -> Option<Self> {
        match s {
            "hate" => Some(Label::Hate),
            "non_hate" => Some(Label::NonHate),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledSample {
    pub text: String,
    pub label: Label,
    pub source: String,
}

impl LabeledSample {
    pub fn new(text: impl Into<String>, label: Label, source: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            label,
            source: source.into(),
        }
    }
}

/// Reads a `text,label,source` CSV file.
pub fn ingest_csv(path: impl AsRef<Path>) -> Result<Vec<LabeledSample>, DatasetError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file)
}

/// Reads CSV from any reader. Row numbers in errors count the header as row 1.
pub fn read_csv<R: Read>(reader: R) -> Result<Vec<LabeledSample>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != CSV_HEADER {
        return Err(DatasetError::Header { found: header });
    }
    let mut out = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 2;
        let record = record.map_err(|e| DatasetError::Row { row, message: e.to_string() })?;
        if record.len() != 3 {
            return Err(DatasetError::Row {
                row,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let label = match record[1].trim() {
            "0" => Label::NonHate,
            "1" => Label::Hate,
            other => {
                return Err(DatasetError::Row {
                    row,
                    message: format!("unknown label value {other:?} (expected 0 or 1)"),
                })
            }
        };
        out.push(LabeledSample::new(&record[0], label, &record[2]));
    }
    Ok(out)
}

pub fn write_csv<W: Write>(writer: W, samples: &[LabeledSample]) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for s in samples {
        w.write_record([s.text.as_str(), &s.label.as_u8().to_string(), s.source.as_str()])?;
    }
    w.flush().map_err(|source| DatasetError::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}

pub fn write_csv_file(path: impl AsRef<Path>, samples: &[LabeledSample]) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    write_csv(std::io::BufWriter::new(file), samples)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnifyReport {
    pub input_count: usize,
    pub dropped_overlength: usize,
    pub dropped_empty: usize,
    pub duplicate_count: usize,
    /// Duplicates whose label disagreed with the kept (first) occurrence.
    pub label_conflicts: usize,
    pub output_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unified {
    pub samples: Vec<LabeledSample>,
    pub report: UnifyReport,
}

/// Concatenates corpora, normalizes, applies the 60-word length filter and
/// drops exact duplicates of the normalized text, keeping the first
/// occurrence. Emitted samples carry normalized text.
pub fn unify(corpora: &[Vec<LabeledSample>]) -> Unified {
    unify_with_limit(corpora, DEFAULT_MAX_WORDS)
}

pub fn unify_with_limit(corpora: &[Vec<LabeledSample>], max_words: usize) -> Unified {
    let mut report = UnifyReport::default();
    let mut kept: HashMap<String, Label> = HashMap::new();
    let mut samples = Vec::new();
    for sample in corpora.iter().flatten() {
        report.input_count += 1;
        let norm = normalize(&sample.text);
        if !passes_length_filter(&norm, max_words) {
            report.dropped_overlength += 1;
            continue;
        }
        if norm.is_empty() {
            report.dropped_empty += 1;
            continue;
        }
        if let Some(&first) = kept.get(norm.as_str()) {
            report.duplicate_count += 1;
            if first != sample.label {
                report.label_conflicts += 1;
            }
            continue;
        }
        kept.insert(norm.as_str().to_string(), sample.label);
        samples.push(LabeledSample::new(norm.into_string(), sample.label, sample.source.clone()));
    }
    report.output_count = samples.len();
    Unified { samples, report }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64, seed: u64) -> Result<Self, DatasetError> {
        let spec = Self {
            train_fraction: train,
            val_fraction: val,
            test_fraction: test,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Approximates a 490K / 30K / 10K partition.
    pub fn standard(seed: u64) -> Self {
        Self {
            train_fraction: 0.925,
            val_fraction: 0.057,
            test_fraction: 0.018,
            seed,
        }
    }

    pub fn fractions(&self) -> [f64; 3] {
        [self.train_fraction, self.val_fraction, self.test_fraction]
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let f = self.fractions();
        if f.iter().any(|x| !x.is_finite() || *x <= 0.0) {
            return Err(DatasetError::InvalidSplit(format!("every fraction must be > 0, got {f:?}")));
        }
        let sum: f64 = f.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DatasetError::InvalidSplit(format!("fractions sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<LabeledSample>,
    pub val: Vec<LabeledSample>,
    pub test: Vec<LabeledSample>,
}

impl Splits {
    pub fn parts(&self) -> [(&'static str, &[LabeledSample]); 3] {
        [("train", &self.train), ("val", &self.val), ("test", &self.test)]
    }
}

/// Largest-remainder (Hamilton) apportionment of `n` items over `fractions`.
/// Ties in the fractional remainder go to the earlier split.
pub fn largest_remainder(n: usize, fractions: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    // Remainders are compared on a 1e-9 grid so rounding noise cannot break a tie.
    let remainder = |i: usize| ((quotas[i] - quotas[i].floor()) * 1e9).round() as i64;
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(remainder(i)), i));
    for &i in order.iter().cycle().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Shuffles each class with a seeded ChaCha8 generator and allocates it
/// across train/val/test by largest remainder. Output order within each
/// split is class-major (non-hate first), then shuffled order.
pub fn stratified_split(samples: &[LabeledSample], spec: &SplitSpec) -> Result<Splits, DatasetError> {
    spec.validate()?;
    let fractions = spec.fractions();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut splits = Splits {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for label in [Label::NonHate, Label::Hate] {
        let mut class: Vec<&LabeledSample> = samples.iter().filter(|s| s.label == label).collect();
        if class.len() < fractions.len() {
            return Err(DatasetError::ClassTooSmall {
                label,
                count: class.len(),
                needed: fractions.len(),
            });
        }
        class.shuffle(&mut rng);
        let counts = largest_remainder(class.len(), &fractions);
        let mut rest = class.as_slice();
        for (count, dest) in counts.iter().zip([&mut splits.train, &mut splits.val, &mut splits.test]) {
            let (head, tail) = rest.split_at(*count);
            dest.extend(head.iter().map(|s| (*s).clone()));
            rest = tail;
        }
    }
    Ok(splits)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub count: usize,
    pub non_hate: usize,
    pub hate: usize,
    /// non_hate / count; `None` for an empty corpus.
    pub class_ratio: Option<f64>,
    /// Samples whose normalized text repeats an earlier length-passing sample.
    pub duplicate_count: usize,
    /// Samples exceeding the word limit after normalization.
    pub dropped_overlength: usize,
}

pub fn corpus_stats(samples: &[LabeledSample]) -> CorpusStats {
    let hate = samples.iter().filter(|s| s.label == Label::Hate).count();
    let non_hate = samples.len() - hate;
    let mut seen = HashSet::new();
    let mut duplicate_count = 0;
    let mut dropped_overlength = 0;
    for s in samples {
        let norm = normalize(&s.text);
        if !passes_length_filter(&norm, DEFAULT_MAX_WORDS) {
            dropped_overlength += 1;
        } else if !norm.is_empty() && !seen.insert(norm.into_string()) {
            duplicate_count += 1;
        }
    }
    CorpusStats {
        count: samples.len(),
        non_hate,
        hate,
        class_ratio: (!samples.is_empty()).then(|| non_hate as f64 / samples.len() as f64),
        duplicate_count,
        dropped_overlength,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPartManifest {
    pub file: String,
    pub count: usize,
    pub non_hate: usize,
    pub hate: usize,
    pub class_ratio: Option<f64>,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub fractions: [f64; 3],
    pub input_count: usize,
    pub input_class_ratio: Option<f64>,
    pub parts: Vec<SplitPartManifest>,
}

/// Writes `train.csv`, `val.csv`, `test.csv` and `manifest.json` into `dir`.
pub fn write_splits(
    dir: impl AsRef<Path>,
    input: &[LabeledSample],
    splits: &Splits,
    spec: &SplitSpec,
) -> Result<SplitManifest, DatasetError> {
    let dir = dir.as_ref();
    let io = |source| DatasetError::Io {
        path: dir.display().to_string(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut parts = Vec::new();
    for (name, samples) in splits.parts() {
        let mut buf = Vec::new();
        write_csv(&mut buf, samples)?;
        let file = format!("{name}.csv");
        std::fs::write(dir.join(&file), &buf).map_err(io)?;
        let stats = corpus_stats(samples);
        parts.push(SplitPartManifest {
            file,
            count: stats.count,
            non_hate: stats.non_hate,
            hate: stats.hate,
            class_ratio: stats.class_ratio,
            sha256: hex_digest(&buf),
        });
    }
    let manifest = SplitManifest {
        seed: spec.seed,
        fractions: spec.fractions(),
        input_count: input.len(),
        input_class_ratio: corpus_stats(input).class_ratio,
        parts,
    };
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    std::fs::write(dir.join("manifest.json"), json).map_err(io)?;
    Ok(manifest)
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
