//! Combines the rule layer and the scorer into a single verdict.
//!
//! | hate score   | action | layer          |
//! |--------------|--------|----------------|
//! | `< 0.40`     | allow  | none           |
//! | `0.40..=0.99`| block  | ai_detection   |
//! | `= 1.00`     | block  | rule_based     |
//!
//! Model scores are capped at 0.99, so 1.00 only ever comes from a rule hit.

use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normalize::{normalize, NormalizedText};
use crate::rules::{CompiledRuleSet, MatchResult};
use crate::scorer::{HateScore, Scorer};

/// Score assigned to rule-layer blocks.
pub const RULE_SCORE: f64 = 1.00;
/// Upper bound applied to model scores.
pub const MAX_MODEL_SCORE: f64 = 0.99;
pub const DEFAULT_ALLOW_THRESHOLD: f64 = 0.40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Allow,
    Block,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Allow => "allow",
            Action::Block => "block",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    None,
    RuleBased,
    AiDetection,
}

impl Layer {
    pub fn as_str(self) -> &'static str {
        match self {
            Layer::None => "none",
            Layer::RuleBased => "rule_based",
            Layer::AiDetection => "ai_detection",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(Layer::None),
            "rule_based" => Some(Layer::RuleBased),
            "ai_detection" => Some(Layer::AiDetection),
            _ => None,
        }
    }
}

/// What to do when the scorer fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailPolicy {
    /// Allow with score 0.0.
    #[default]
    FailOpenAllow,
    /// Block with score 0.99, attributed to the model layer.
    FailClosedBlock,
}

impl std::str::FromStr for FailPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fail_open_allow" | "open" => Ok(FailPolicy::FailOpenAllow),
            "fail_closed_block" | "closed" => Ok(FailPolicy::FailClosedBlock),
            other => Err(format!("unknown fail policy {other:?}")),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("allow threshold must lie strictly between 0 and 1, got {0}")]
    Threshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    allow_threshold: f64,
    pub fail_policy: FailPolicy,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            allow_threshold: DEFAULT_ALLOW_THRESHOLD,
            fail_policy: FailPolicy::default(),
        }
    }
}

impl PipelineConfig {
    pub fn new(allow_threshold: f64, fail_policy: FailPolicy) -> Result<Self, ConfigError> {
        if !(allow_threshold > 0.0 && allow_threshold < 1.0) {
            return Err(ConfigError::Threshold(allow_threshold));
        }
        Ok(Self {
            allow_threshold,
            fail_policy,
        })
    }

    pub fn allow_threshold(&self) -> f64 {
        self.allow_threshold
    }

    pub fn rule_score(&self) -> f64 {
        RULE_SCORE
    }
}

/// Pure threshold function of the decision table. A rule hit dominates.
pub fn classify_score(config: &PipelineConfig, score: HateScore, rule_hit: bool) -> (Action, Layer) {
    if rule_hit {
        (Action::Block, Layer::RuleBased)
    } else if score.value() < config.allow_threshold {
        (Action::Allow, Layer::None)
    } else {
        (Action::Block, Layer::AiDetection)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub action: Action,
    pub score: HateScore,
    pub layer: Layer,
    pub rule_hits: Vec<String>,
    pub normalized_text: NormalizedText,
    pub scorer_version: String,
    pub decided_at: DateTime<Utc>,
    /// Set when the scorer failed and the fail policy decided the verdict.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Verdict {
    /// Checks the layer/score/action consistency rules for a verdict issued
    /// under `threshold`.
    pub fn check_invariants(&self, threshold: f64) -> Result<(), String> {
        let s = self.score.value();
        let ok = match self.layer {
            Layer::RuleBased => s == RULE_SCORE && self.action == Action::Block && !self.rule_hits.is_empty(),
            Layer::AiDetection => {
                (threshold..=MAX_MODEL_SCORE).contains(&s) && self.action == Action::Block && self.rule_hits.is_empty()
            }
            Layer::None => s < threshold && self.action == Action::Allow && self.rule_hits.is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(format!(
                "inconsistent verdict: layer {} with action {:?}, score {s}, {} rule hits",
                self.layer.as_str(),
                self.action,
                self.rule_hits.len()
            ))
        }
    }
}

/// Runs one text through normalize, rule match and (when no rule fires) the scorer.
pub fn decide(config: &PipelineConfig, rules: &CompiledRuleSet, scorer: &dyn Scorer, raw_text: &str) -> Verdict {
    let text = normalize(raw_text);
    let matches = rules.scan(&text);
    decide_normalized(config, &matches, scorer, text)
}

fn decide_normalized(config: &PipelineConfig, matches: &MatchResult, scorer: &dyn Scorer, text: NormalizedText) -> Verdict {
    let scorer_version = scorer.version().to_string();
    if matches.matched() {
        return Verdict {
            action: Action::Block,
            score: HateScore::ONE,
            layer: Layer::RuleBased,
            rule_hits: matches.rule_ids(),
            normalized_text: text,
            scorer_version,
            decided_at: Utc::now(),
            error: None,
        };
    }
    let (score, error) = match scorer.score(&text) {
        Ok(p) => (p.min(MAX_MODEL_SCORE), None),
        Err(e) => {
            tracing::error!(error = %e, policy = ?config.fail_policy, "scorer failed; applying fail policy");
            let fallback = match config.fail_policy {
                FailPolicy::FailOpenAllow => HateScore::ZERO,
                FailPolicy::FailClosedBlock => HateScore::new(MAX_MODEL_SCORE).expect("constant in range"),
            };
            (fallback, Some(e.to_string()))
        }
    };
    let (action, layer) = match (&error, config.fail_policy) {
        (Some(_), FailPolicy::FailOpenAllow) => (Action::Allow, Layer::None),
        (Some(_), FailPolicy::FailClosedBlock) => (Action::Block, Layer::AiDetection),
        (None, _) => classify_score(config, score, false),
    };
    Verdict {
        action,
        score,
        layer,
        rule_hits: Vec::new(),
        normalized_text: text,
        scorer_version,
        decided_at: Utc::now(),
        error,
    }
}

/// A configured rule set and scorer.
#[derive(Clone)]
pub struct Pipeline {
    config: PipelineConfig,
    rules: Arc<CompiledRuleSet>,
    scorer: Arc<dyn Scorer>,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline")
            .field("config", &self.config)
            .field("rules_version", &self.rules.version())
            .field("scorer", self.scorer.descriptor())
            .finish()
    }
}

impl Pipeline {
    pub fn new(config: PipelineConfig, rules: Arc<CompiledRuleSet>, scorer: Arc<dyn Scorer>) -> Self {
        Self { config, rules, scorer }
    }

    pub fn decide(&self, raw_text: &str) -> Verdict {
        decide(&self.config, &self.rules, self.scorer.as_ref(), raw_text)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn rules(&self) -> &Arc<CompiledRuleSet> {
        &self.rules
    }

    pub fn scorer(&self) -> &Arc<dyn Scorer> {
        &self.scorer
    }

    pub fn scorer_version(&self) -> &str {
        self.scorer.version()
    }
}
