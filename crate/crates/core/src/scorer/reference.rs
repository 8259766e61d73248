//! Hashed bag-of-words logistic regression.
//!
//! Features: each distinct whitespace token of the (truncated) normalized
//! text sets one slot, `fnv1a64(token) mod FEATURE_DIM`, to 1.0. A bias term
//! is added. Training is per-sample SGD over a seeded shuffle with the
//! fixed [`FitParams::default`] hyperparameters.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{sigmoid, HateScore, ScoreError, Scorer, ScorerDescriptor, ScorerKind};
use crate::dataset::Label;
use crate::normalize::NormalizedText;

/// Hashed feature space size (2^18).
pub const FEATURE_DIM: usize = 1 << 18;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn feature_index(token: &str) -> usize {
    let mut h = FNV_OFFSET;
    for b in token.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    (h % FEATURE_DIM as u64) as usize
}

fn features(text: &NormalizedText) -> BTreeSet<usize> {
    text.words().map(feature_index).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for FitParams {
    fn default() -> Self {
        Self {
            epochs: 20,
            learning_rate: 0.5,
            l2: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceScorer {
    descriptor: ScorerDescriptor,
    weights: Vec<f64>,
    bias: f64,
}

impl ReferenceScorer {
    /// A scorer with every weight at zero; scores 0.5 on any input.
    pub fn zeros() -> Self {
        Self::from_weights(vec![0.0; FEATURE_DIM], 0.0)
    }

    pub fn from_weights(weights: Vec<f64>, bias: f64) -> Self {
        assert_eq!(weights.len(), FEATURE_DIM, "weight vector must have FEATURE_DIM entries");
        let version = weights_version(&weights, bias);
        Self {
            descriptor: ScorerDescriptor::new("reference-logistic", ScorerKind::Reference, version),
            weights,
            bias,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    fn logit(&self, feats: &BTreeSet<usize>) -> f64 {
        self.bias + feats.iter().map(|&i| self.weights[i]).sum::<f64>()
    }
}

fn weights_version(weights: &[f64], bias: f64) -> String {
    let mut h = Sha256::new();
    for w in weights {
        h.update(w.to_bits().to_le_bytes());
    }
    h.update(bias.to_bits().to_le_bytes());
    let hex: String = h.finalize().iter().take(6).map(|b| format!("{b:02x}")).collect();
    format!("ref-{hex}")
}

impl Scorer for ReferenceScorer {
    fn descriptor(&self) -> &ScorerDescriptor {
        &self.descriptor
    }

    fn score(&self, text: &NormalizedText) -> Result<HateScore, ScoreError> {
        let text = text.truncate_words(self.descriptor.max_input_words);
        HateScore::new(sigmoid(self.logit(&features(&text))))
    }
}

/// Fits the reference model with the default hyperparameters.
pub fn fit_reference(samples: &[(NormalizedText, Label)], seed: u64) -> Result<ReferenceScorer, ScoreError> {
    fit_reference_with(samples, seed, FitParams::default())
}

pub fn fit_reference_with(
    samples: &[(NormalizedText, Label)],
    seed: u64,
    params: FitParams,
) -> Result<ReferenceScorer, ScoreError> {
    let hate = samples.iter().filter(|(_, l)| l.is_hate()).count();
    if hate == 0 {
        return Err(ScoreError::SingleClass("non_hate"));
    }
    if hate == samples.len() {
        return Err(ScoreError::SingleClass("hate"));
    }
    let data: Vec<(BTreeSet<usize>, f64)> = samples
        .iter()
        .map(|(t, l)| (features(&t.truncate_words(crate::DEFAULT_MAX_WORDS)), f64::from(l.as_u8())))
        .collect();

    let mut weights = vec![0.0; FEATURE_DIM];
    let mut bias = 0.0;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (feats, y) = &data[i];
            let z = bias + feats.iter().map(|&f| weights[f]).sum::<f64>();
            let grad = sigmoid(z) - y;
            bias -= params.learning_rate * grad;
            for &f in feats {
                weights[f] -= params.learning_rate * (grad + params.l2 * weights[f]);
            }
        }
    }
    Ok(ReferenceScorer::from_weights(weights, bias))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalize::normalize;

    fn toy() -> Vec<(NormalizedText, Label)> {
        let mut v = Vec::new();
        for _ in 0..5 {
            v.push((normalize("bad"), Label::Hate));
            v.push((normalize("good"), Label::NonHate));
        }
        v
    }

    #[test]
    fn zero_weights_score_half() {
        let s = ReferenceScorer::zeros();
        assert_eq!(s.score(&normalize("anything")).unwrap().value(), 0.5);
        assert_eq!(s.score(&normalize("")).unwrap().value(), 0.5);
    }

    #[test]
    fn separable_toy_fits_perfectly() {
        let s = fit_reference(&toy(), 3).unwrap();
        for (t, l) in toy() {
            let p = s.score(&t).unwrap().value();
            assert_eq!(p >= 0.5, l.is_hate(), "{t} -> {p}");
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = fit_reference(&toy(), 11).unwrap();
        let b = fit_reference(&toy(), 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.version(), b.version());
    }

    #[test]
    fn single_class_rejected() {
        let only_hate = vec![(normalize("x"), Label::Hate)];
        assert!(matches!(fit_reference(&only_hate, 0), Err(ScoreError::SingleClass("hate"))));
        assert!(matches!(fit_reference(&[], 0), Err(ScoreError::SingleClass(_))));
    }

    #[test]
    fn truncates_long_inputs() {
        let mut w = vec![0.0; FEATURE_DIM];
        w[feature_index("tail")] = 10.0;
        let s = ReferenceScorer::from_weights(w, 0.0);
        let long = normalize(&format!("{} tail", vec!["w"; 60].join(" ")));
        assert_eq!(s.score(&long).unwrap().value(), 0.5);
        assert!(s.score(&normalize("w tail")).unwrap().value() > 0.99);
    }

    #[test]
    fn fnv_reference_vector() {
        // FNV-1a 64 of "a" is 0xaf63dc4c8601ec8c.
        assert_eq!(feature_index("a"), (0xaf63_dc4c_8601_ec8c_u64 % FEATURE_DIM as u64) as usize);
    }
}
