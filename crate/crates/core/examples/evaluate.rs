//! Evaluates the pipeline on a labelled set and prints the report.
use std::sync::Arc;

use hatemod::metrics::evaluate;
use hatemod::rules::parse_rules;
use hatemod::scorer::fit_reference;
use hatemod::synthetic::{separable_corpus, DEMO_RULES};
use hatemod::{normalize, CompiledRuleSet, EvalReport, Pipeline, PipelineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let train: Vec<_> = separable_corpus(3_000, 0.33, 11, "train")
        .into_iter()
        .map(|s| (normalize(&s.text), s.label))
        .collect();
    let test = separable_corpus(500, 0.33, 12, "test");

    let rules = CompiledRuleSet::compile(parse_rules(DEMO_RULES)?)?;
    let pipeline = Pipeline::new(PipelineConfig::default(), Arc::new(rules), Arc::new(fit_reference(&train, 11)?));
    let report = evaluate(&pipeline, &test)?;
    let kv = report.to_kv();
    print!("{kv}");
    assert_eq!(EvalReport::parse(&kv)?, report);
    Ok(())
}
