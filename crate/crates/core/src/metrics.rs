//! Binary classification metrics with hate as the positive class.
//!
//! Degenerate cases are fixed by convention: an F1 component whose precision,
//! recall or harmonic mean has a zero denominator is 0, and MCC is 0 whenever
//! any marginal in its denominator is 0.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Label, LabeledSample};
use crate::decision::{Action, Pipeline};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("predictions ({predictions}) and labels ({labels}) differ in length")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("no samples to evaluate")]
    Empty,
    #[error("report line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        Self { tp, fp, tn, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn record(&mut self, predicted_hate: bool, actual_hate: bool) {
        match (predicted_hate, actual_hate) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    fn ensure_nonempty(&self) -> Result<(), MetricsError> {
        if self.total() == 0 {
            Err(MetricsError::Empty)
        } else {
            Ok(())
        }
    }
}

/// Builds a matrix from parallel prediction/label vectors (`true` = hate).
pub fn confusion_from(predictions: &[bool], labels: &[bool]) -> Result<ConfusionMatrix, MetricsError> {
    if predictions.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &l) in predictions.iter().zip(labels) {
        cm.record(p, l);
    }
    Ok(cm)
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    cm.ensure_nonempty()?;
    Ok((cm.tp + cm.tn) as f64 / cm.total() as f64)
}

fn ratio_or_zero(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(tp: u64, fp: u64, fn_: u64) -> f64 {
    let precision = ratio_or_zero(tp, tp + fp);
    let recall = ratio_or_zero(tp, tp + fn_);
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Mean of the hate-class and non-hate-class F1 scores.
pub fn macro_f1(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    cm.ensure_nonempty()?;
    let positive = f1(cm.tp, cm.fp, cm.fn_);
    // For the negative class the roles of the off-diagonal cells swap.
    let negative = f1(cm.tn, cm.fn_, cm.fp);
    Ok((positive + negative) / 2.0)
}

/// Matthews correlation coefficient. The numerator is exact in i128 and the
/// four marginal sums are multiplied exactly in u128 for counts up to 10^9,
/// so the result is invariant under any relabelling that permutes them.
pub fn mcc(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    cm.ensure_nonempty()?;
    let (tp, fp, tn, fn_) = (cm.tp as u128, cm.fp as u128, cm.tn as u128, cm.fn_ as u128);
    let factors = [tp + fp, tp + fn_, tn + fp, tn + fn_];
    if factors.contains(&0) {
        return Ok(0.0);
    }
    let numerator = (tp * tn) as i128 - (fp * fn_) as i128;
    let denominator = match factors.iter().try_fold(1u128, |acc, &f| acc.checked_mul(f)) {
        Some(product) => (product as f64).sqrt(),
        None => factors.iter().map(|&f| (f as f64).sqrt()).product(),
    };
    Ok((numerator as f64 / denominator).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub mcc: f64,
    pub threshold: f64,
    pub scorer_version: String,
    pub rules_version: String,
    pub n: u64,
    /// Samples whose scorer call failed and were decided by the fail policy.
    pub scorer_failures: u64,
}

impl EvalReport {
    pub fn from_confusion(
        confusion: ConfusionMatrix,
        threshold: f64,
        scorer_version: impl Into<String>,
        rules_version: impl Into<String>,
        scorer_failures: u64,
    ) -> Result<Self, MetricsError> {
        Ok(Self {
            accuracy: accuracy(&confusion)?,
            macro_f1: macro_f1(&confusion)?,
            mcc: mcc(&confusion)?,
            n: confusion.total(),
            confusion,
            threshold,
            scorer_version: scorer_version.into(),
            rules_version: rules_version.into(),
            scorer_failures,
        })
    }

    /// `key=value` lines in a fixed order. Floats use Rust's shortest
    /// round-trip formatting, so [`EvalReport::parse`] recovers them exactly.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let c = &self.confusion;
        let pairs: [(&str, String); 13] = [
            ("positive_class", "hate".into()),
            ("n", self.n.to_string()),
            ("tp", c.tp.to_string()),
            ("fp", c.fp.to_string()),
            ("tn", c.tn.to_string()),
            ("fn", c.fn_.to_string()),
            ("accuracy", format!("{:?}", self.accuracy)),
            ("macro_f1", format!("{:?}", self.macro_f1)),
            ("mcc", format!("{:?}", self.mcc)),
            ("threshold", format!("{:?}", self.threshold)),
            ("scorer_version", self.scorer_version.clone()),
            ("rules_version", self.rules_version.clone()),
            ("scorer_failures", self.scorer_failures.to_string()),
        ];
        for (k, v) in pairs {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, MetricsError> {
        let mut map = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| MetricsError::Parse {
                line: idx + 1,
                message: "missing '='".into(),
            })?;
            map.insert(k.trim().to_string(), v.to_string());
        }
        let get = |k: &str| {
            map.get(k).cloned().ok_or_else(|| MetricsError::Parse {
                line: 0,
                message: format!("missing key {k}"),
            })
        };
        let num = |k: &str| -> Result<u64, MetricsError> {
            get(k)?.parse().map_err(|e| MetricsError::Parse {
                line: 0,
                message: format!("{k}: {e}"),
            })
        };
        let real = |k: &str| -> Result<f64, MetricsError> {
            get(k)?.parse().map_err(|e| MetricsError::Parse {
                line: 0,
                message: format!("{k}: {e}"),
            })
        };
        Ok(Self {
            confusion: ConfusionMatrix::new(num("tp")?, num("fp")?, num("tn")?, num("fn")?),
            accuracy: real("accuracy")?,
            macro_f1: real("macro_f1")?,
            mcc: real("mcc")?,
            threshold: real("threshold")?,
            scorer_version: get("scorer_version")?,
            rules_version: get("rules_version")?,
            n: num("n")?,
            scorer_failures: num("scorer_failures")?,
        })
    }
}

/// Runs the full moderation pipeline over `samples`, treating a block as a
/// hate prediction.
pub fn evaluate(pipeline: &Pipeline, samples: &[LabeledSample]) -> Result<EvalReport, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    let mut failures = 0;
    for sample in samples {
        let verdict = pipeline.decide(&sample.text);
        if verdict.error.is_some() {
            failures += 1;
        }
        cm.record(verdict.action == Action::Block, sample.label == Label::Hate);
    }
    EvalReport::from_confusion(
        cm,
        pipeline.config().allow_threshold(),
        pipeline.scorer_version(),
        pipeline.rules().version(),
        failures,
    )
}
