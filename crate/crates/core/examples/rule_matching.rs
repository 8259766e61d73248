//! Compiles the demo lexicon and scans a few texts.
use hatemod::rules::{parse_rules, render_rules};
use hatemod::synthetic::DEMO_RULES;
use hatemod::{normalize, CompiledRuleSet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rules = CompiledRuleSet::compile(parse_rules(DEMO_RULES)?)?;
    println!("{} rules, version {}", rules.len(), rules.version());

    for raw in ["Follow #PurgeThem now", "hatewords are not hateword", "code 1488 here", "(((them)))", "nothing"] {
        let result = rules.scan(&normalize(raw));
        println!("{raw:?}: matched={} hits={:?}", result.matched(), result.rule_ids());
    }

    // Rendering and re-parsing gives back the same set and version.
    let again = CompiledRuleSet::compile(parse_rules(&render_rules(rules.entries()))?)?;
    assert_eq!(again.version(), rules.version());
    Ok(())
}
