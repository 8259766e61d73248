//! Three-layer hate-speech moderation.
//!
//! 1. [`rules`]: a versioned lexicon of terms, hashtags and regexes matched
//!    against [normalized](normalize) text. Any hit blocks with score 1.0.
//! 2. [`scorer`]: a hate probability from either an exported transformer
//!    model directory or the built-in hashed logistic-regression reference.
//! 3. [`feedback`]: append-only reviewer labels on issued verdicts, exportable
//!    as training data.
//!
//! [`decision::Pipeline`] ties the first two together; [`service`] exposes
//! the pipeline and the feedback store over HTTP. [`dataset`] and
//! [`metrics`] cover corpus preparation and offline evaluation.
//!
//! ```
//! use std::sync::Arc;
//! use hatemod::{CompiledRuleSet, Pipeline, PipelineConfig, Action, Layer};
//! use hatemod::synthetic::{bundled_reference_scorer, DEMO_RULES};
//!
//! let rules = CompiledRuleSet::compile(hatemod::rules::parse_rules(DEMO_RULES).unwrap()).unwrap();
//! let pipeline = Pipeline::new(PipelineConfig::default(), Arc::new(rules), Arc::new(bundled_reference_scorer()));
//!
//! let v = pipeline.decide("Follow #PurgeThem now");
//! assert_eq!((v.action, v.layer), (Action::Block, Layer::RuleBased));
//! assert_eq!(v.score.value(), 1.0);
//!
//! let v = pipeline.decide("great coffee this morning");
//! assert_eq!((v.action, v.layer), (Action::Allow, Layer::None));
//! ```

pub mod dataset;
pub mod decision;
pub mod feedback;
pub mod metrics;
pub mod normalize;
pub mod rules;
pub mod scorer;
pub mod service;
pub mod synthetic;

pub use dataset::{Label, LabeledSample};
pub use decision::{Action, FailPolicy, Layer, Pipeline, PipelineConfig, Verdict};
pub use feedback::{FeedbackFilter, FeedbackRecord, FeedbackStore, SqliteFeedbackStore};
pub use metrics::{ConfusionMatrix, EvalReport};
pub use normalize::{normalize, NormalizedText, DEFAULT_MAX_WORDS};
pub use rules::{CompiledRuleSet, MatchResult, RuleEntry, RuleHit};
pub use scorer::{ExportedModelScorer, HateScore, ReferenceScorer, ScoreError, Scorer};
