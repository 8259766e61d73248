//! Fits the hashed logistic-regression scorer on a synthetic corpus.
use hatemod::scorer::fit_reference;
use hatemod::synthetic::separable_corpus;
use hatemod::{normalize, Scorer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let train: Vec<_> = separable_corpus(2_000, 0.33, 7, "synthetic")
        .into_iter()
        .map(|s| (normalize(&s.text), s.label))
        .collect();
    let scorer = fit_reference(&train, 7)?;
    println!("version {}", scorer.version());
    for raw in ["those vermin again", "great coffee this morning", "vermin at the market"] {
        println!("{raw:?}: p(hate) = {:.4}", scorer.score(&normalize(raw))?.value());
    }
    Ok(())
}
