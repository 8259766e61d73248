//! Writes a small exported-model directory and loads it back through ONNX.
use hatemod::scorer::{load_exported_model, write_toy_artifact, ToyClassifier};
use hatemod::synthetic::{HATE_CUES, NEUTRAL_WORDS};
use hatemod::{normalize, Scorer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let vocab: Vec<&str> = NEUTRAL_WORDS.iter().chain(HATE_CUES).copied().collect();
    let model = ToyClassifier::seeded(&vocab, HATE_CUES, 8, 3);
    let dir = tempfile::tempdir()?;
    let probes = ["those vermin again", "a walk in the park", ""];
    let manifest = write_toy_artifact(dir.path(), &model, "toy-1", &probes)?;
    println!("{}", serde_json::to_string_pretty(&manifest)?);

    let scorer = load_exported_model(dir.path())?;
    println!("self-test max deviation {:.2e}", scorer.verify_self_test()?);
    for raw in probes {
        let onnx = scorer.score(&normalize(raw))?.value();
        let plain = model.hate_probability(raw)?;
        println!("{raw:?}: onnx {onnx:.6} plain {plain:.6}");
    }
    Ok(())
}
