//! Deterministic synthetic corpora.
//!
//! Hate-class texts always contain at least one cue word from
//! [`HATE_CUES`]; non-hate texts never do. Both classes draw filler from
//! [`NEUTRAL_WORDS`]. The split is therefore linearly separable in a bag of
//! words, which is what the bundled reference scorer and the end-to-end
//! tests rely on.

use once_cell::sync::Lazy;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Label, LabeledSample};
use crate::normalize::normalize;
use crate::scorer::{fit_reference, ReferenceScorer};

pub const HATE_CUES: &[&str] = &[
    "vermin", "subhuman", "parasites", "infestation", "degenerates", "exterminate", "savages", "filthy",
    "invaders", "mongrels", "cockroaches", "plague",
];

pub const NEUTRAL_WORDS: &[&str] = &[
    "the", "a", "today", "people", "those", "city", "game", "weather", "coffee", "music", "team", "new",
    "neighbors", "school", "really", "think", "about", "our", "their", "street", "market", "again", "always",
    "everyone", "town", "night", "morning", "friends", "group", "this", "that", "just", "so", "very", "more",
    "work", "train", "park", "food", "love", "great", "nice", "movie", "book", "weekend", "home",
];

/// Generates `n` samples with the given hate fraction. Texts are 3 to 12
/// words long.
pub fn separable_corpus(n: usize, hate_fraction: f64, seed: u64, source: &str) -> Vec<LabeledSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_hate = (n as f64 * hate_fraction).round() as usize;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let label = if i < n_hate { Label::Hate } else { Label::NonHate };
        out.push(LabeledSample::new(synthetic_text(&mut rng, label), label, source));
    }
    out.shuffle(&mut rng);
    out
}

fn synthetic_text(rng: &mut impl Rng, label: Label) -> String {
    let len = rng.gen_range(3..=12);
    let mut words: Vec<&str> = (0..len).map(|_| *NEUTRAL_WORDS.choose(rng).unwrap()).collect();
    if label.is_hate() {
        let cues = rng.gen_range(1..=2);
        for _ in 0..cues {
            let pos = rng.gen_range(0..=words.len());
            words.insert(pos, HATE_CUES.choose(rng).unwrap());
        }
    }
    // Occasional surface noise that normalization removes.
    let mut text = words.join(" ");
    match rng.gen_range(0..10) {
        0 => text = format!("@user{} {text}", rng.gen_range(0..1000)),
        1 => text.push_str(" https://t.co/abc"),
        2 => text = text.to_uppercase(),
        _ => {}
    }
    text
}

/// Seed used for the bundled reference scorer.
pub const REFERENCE_SEED: u64 = 20_240_601;

/// Fits the reference scorer used when no exported model is configured:
/// 2,000 synthetic samples at a 67/33 non-hate/hate ratio.
pub fn bundled_reference_scorer() -> ReferenceScorer {
    let corpus = separable_corpus(2_000, 0.33, REFERENCE_SEED, "bundled");
    let samples: Vec<_> = corpus.iter().map(|s| (normalize(&s.text), s.label)).collect();
    fit_reference(&samples, REFERENCE_SEED).expect("bundled corpus has both classes")
}

/// Process-wide instance of [`bundled_reference_scorer`], fitted on first use.
pub fn bundled_reference_scorer_cached() -> &'static ReferenceScorer {
    static SCORER: Lazy<ReferenceScorer> = Lazy::new(bundled_reference_scorer);
    &SCORER
}

/// A small demonstration lexicon in the rules file format. Term entries are
/// placeholders; real deployments supply their own lexicon.
pub const DEMO_RULES: &str = include_str!("../data/demo_rules.tsv");
