//! Runs the rule layer and scorer together under both fail policies.
use std::sync::Arc;

use hatemod::rules::parse_rules;
use hatemod::scorer::{ScorerDescriptor, ScorerKind};
use hatemod::synthetic::{bundled_reference_scorer, DEMO_RULES};
use hatemod::{CompiledRuleSet, FailPolicy, HateScore, NormalizedText, Pipeline, PipelineConfig, ScoreError, Scorer};

struct Offline(ScorerDescriptor);

impl Scorer for Offline {
    fn descriptor(&self) -> &ScorerDescriptor {
        &self.0
    }
    fn score(&self, _: &NormalizedText) -> Result<HateScore, ScoreError> {
        Err(ScoreError::Runtime("backend offline".into()))
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rules = Arc::new(CompiledRuleSet::compile(parse_rules(DEMO_RULES)?)?);
    let pipeline = Pipeline::new(PipelineConfig::default(), rules.clone(), Arc::new(bundled_reference_scorer()));
    for raw in ["Follow #PurgeThem now", "those filthy vermin", "great coffee this morning"] {
        println!("{raw:?}\n  {}", serde_json::to_string(&pipeline.decide(raw))?);
    }

    let offline = Arc::new(Offline(ScorerDescriptor::new("offline", ScorerKind::Reference, "offline-0")));
    for policy in [FailPolicy::FailOpenAllow, FailPolicy::FailClosedBlock] {
        let p = Pipeline::new(PipelineConfig::new(0.4, policy)?, rules.clone(), offline.clone());
        let v = p.decide("anything at all");
        println!("{policy:?}: {} {} score={} error={:?}", v.action.as_str(), v.layer.as_str(), v.score.value(), v.error);
    }
    Ok(())
}
