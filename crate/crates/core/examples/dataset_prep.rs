//! Unifies two corpora and writes a stratified split with a manifest.
use hatemod::dataset::{corpus_stats, stratified_split, unify, write_splits, SplitSpec};
use hatemod::synthetic::separable_corpus;
use hatemod::LabeledSample;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = separable_corpus(1_000, 0.33, 1, "corpus_a");
    let mut b = separable_corpus(800, 0.25, 2, "corpus_b");
    // A near-duplicate with different casing and a mention, plus one overlong post.
    b.push(LabeledSample::new(format!("@someone {}", a[0].text.to_uppercase()), a[0].label, "corpus_b"));
    b.push(LabeledSample::new(vec!["word"; 80].join(" "), a[0].label, "corpus_b"));

    let unified = unify(&[a, b]);
    println!("{}", serde_json::to_string_pretty(&unified.report)?);
    println!("{}", serde_json::to_string_pretty(&corpus_stats(&unified.samples))?);

    let spec = SplitSpec::standard(42);
    let splits = stratified_split(&unified.samples, &spec)?;
    let dir = tempfile::tempdir()?;
    let manifest = write_splits(dir.path(), &unified.samples, &splits, &spec)?;
    println!("{}", serde_json::to_string_pretty(&manifest)?);
    Ok(())
}
