//! Records reviewer labels against verdicts and exports a training batch.
use std::sync::Arc;

use hatemod::feedback::{export_training_batch, query_feedback, submit_feedback};
use hatemod::rules::parse_rules;
use hatemod::synthetic::{bundled_reference_scorer, DEMO_RULES};
use hatemod::{CompiledRuleSet, FeedbackFilter, Label, Pipeline, PipelineConfig, SqliteFeedbackStore};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rules = CompiledRuleSet::compile(parse_rules(DEMO_RULES)?)?;
    let pipeline = Pipeline::new(PipelineConfig::default(), Arc::new(rules), Arc::new(bundled_reference_scorer()));
    let store = SqliteFeedbackStore::open_in_memory()?;

    let reviews = [
        ("those filthy vermin", Label::Hate),
        ("vermin in the garden again", Label::NonHate),
        ("great coffee this morning", Label::NonHate),
    ];
    for (text, label) in reviews {
        let verdict = pipeline.decide(text);
        let rec = submit_feedback(&store, text, &verdict, label, "reviewer-1")?;
        println!("{text:?}: model {} reviewer {} agrees={}", verdict.action.as_str(), label.as_str(), rec.agrees_with_model);
    }

    let disagreements = query_feedback(&store, &FeedbackFilter::disagreements())?;
    println!("{} disagreement(s)", disagreements.len());
    let mut csv = Vec::new();
    hatemod::dataset::write_csv(&mut csv, &export_training_batch(&store, &FeedbackFilter::default())?)?;
    print!("{}", String::from_utf8(csv)?);
    Ok(())
}
