//! HTTP surface.
//!
//! | method | path           | body                                                        | success |
//! |--------|----------------|-------------------------------------------------------------|---------|
//! | POST   | `/v1/moderate` | `{"text"}`                                                  | 200 `{action, hate_score, layer, rule_hits, scorer_version, verdict_id}` |
//! | POST   | `/v1/feedback` | `{"verdict_id", "reviewer_label", "reviewer_id"}` or inline `{"text", "verdict", ...}` | 201 `{feedback_id}` |
//! | GET    | `/v1/health`   |                                                             | 200 `{status, rules_version, scorer_version}` |
//!
//! Errors are `{"error": "..."}` with status 400 (bad input), 404 (unknown
//! verdict id), 503 (scorer failure under fail-closed, or store down) or
//! 500 (store write failure).

mod cache;
mod config;

use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

pub use cache::{CachedVerdict, VerdictCache, DEFAULT_CACHE_CAPACITY, DEFAULT_CACHE_TTL};
pub use config::{
    ConfigLayer, ServiceConfig, ServiceConfigError, DEFAULT_FEEDBACK_DB, DEFAULT_PORT, ENV_FAIL_POLICY,
    ENV_FEEDBACK_DB, ENV_MODEL_PATH, ENV_PORT, ENV_RULES_PATH, ENV_THRESHOLD,
};

use crate::dataset::Label;
use crate::decision::{Action, FailPolicy, Layer, Pipeline, PipelineConfig, Verdict};
use crate::feedback::{submit_feedback, FeedbackError, FeedbackStore, SqliteFeedbackStore};
use crate::rules::{CompiledRuleSet, RuleError};
use crate::scorer::{load_exported_model, ScoreError, Scorer};
use crate::synthetic::bundled_reference_scorer;

/// Longest accepted `/v1/moderate` text, in characters.
pub const MAX_TEXT_CHARS: usize = 10_000;

#[derive(Debug, Error)]
pub enum BootError {
    #[error(transparent)]
    Config(#[from] ServiceConfigError),
    #[error("rules: {0}")]
    Rules(#[from] RuleError),
    #[error("scorer: {0}")]
    Scorer(#[from] ScoreError),
    #[error("feedback store: {0}")]
    Store(#[from] FeedbackError),
    #[error("server: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModerateRequest {
    pub text: String,
}

/// Wire form of a verdict. The CLI prints the same object without
/// `verdict_id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictView {
    pub action: Action,
    pub hate_score: f64,
    pub layer: Layer,
    pub rule_hits: Vec<String>,
    pub scorer_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict_id: Option<Uuid>,
}

impl VerdictView {
    pub fn from_verdict(v: &Verdict, verdict_id: Option<Uuid>) -> Self {
        Self {
            action: v.action,
            hate_score: v.score.value(),
            layer: v.layer,
            rule_hits: v.rule_hits.clone(),
            scorer_version: v.scorer_version.clone(),
            verdict_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRequest {
    #[serde(default)]
    pub verdict_id: Option<String>,
    pub reviewer_label: String,
    pub reviewer_id: String,
    /// Inline alternative to `verdict_id`: the raw text and the verdict as issued.
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackResponse {
    pub feedback_id: Uuid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub rules_version: String,
    pub scorer_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorResponse { error: self.message })).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, r.body_text())
    }
}

/// Shared service state. Rule set and scorer are immutable snapshots behind
/// `Arc`s and are replaced whole on reload.
pub struct AppState {
    config: PipelineConfig,
    rules: RwLock<Arc<CompiledRuleSet>>,
    rules_path: Option<PathBuf>,
    scorer: RwLock<Arc<dyn Scorer>>,
    store: Arc<dyn FeedbackStore>,
    cache: VerdictCache,
}

impl std::fmt::Debug for AppState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AppState").field("pipeline", &self.pipeline()).finish_non_exhaustive()
    }
}

impl AppState {
    pub fn new(
        config: PipelineConfig,
        rules: Arc<CompiledRuleSet>,
        scorer: Arc<dyn Scorer>,
        store: Arc<dyn FeedbackStore>,
    ) -> Self {
        Self {
            config,
            rules: RwLock::new(rules),
            rules_path: None,
            scorer: RwLock::new(scorer),
            store,
            cache: VerdictCache::default(),
        }
    }

    /// Remembers where the rules came from so [`AppState::reload_rules`] can re-read them.
    pub fn with_rules_path(mut self, path: impl Into<PathBuf>) -> Self {
        self.rules_path = Some(path.into());
        self
    }

    pub fn with_cache(mut self, cache: VerdictCache) -> Self {
        self.cache = cache;
        self
    }

    /// Loads every component named by `cfg`. A missing or invalid rules file,
    /// model directory or store is a boot error.
    pub fn from_config(cfg: &ServiceConfig) -> Result<Self, BootError> {
        let rules = Arc::new(CompiledRuleSet::from_file(&cfg.rules_path)?);
        let scorer = build_scorer(cfg)?;
        let store: Arc<dyn FeedbackStore> = Arc::new(SqliteFeedbackStore::open(&cfg.feedback_store_path)?);
        Ok(Self::new(cfg.pipeline_config(), rules, scorer, store).with_rules_path(&cfg.rules_path))
    }

    /// Current rule set and scorer as a pipeline snapshot.
    pub fn pipeline(&self) -> Pipeline {
        let rules = self.rules.read().unwrap_or_else(|p| p.into_inner()).clone();
        let scorer = self.scorer.read().unwrap_or_else(|p| p.into_inner()).clone();
        Pipeline::new(self.config, rules, scorer)
    }

    pub fn store(&self) -> &Arc<dyn FeedbackStore> {
        &self.store
    }

    pub fn cache(&self) -> &VerdictCache {
        &self.cache
    }

    pub fn swap_rules(&self, rules: Arc<CompiledRuleSet>) {
        *self.rules.write().unwrap_or_else(|p| p.into_inner()) = rules;
    }

    pub fn swap_scorer(&self, scorer: Arc<dyn Scorer>) {
        *self.scorer.write().unwrap_or_else(|p| p.into_inner()) = scorer;
    }

    /// Recompiles the rules file and swaps it in; the old set stays active on
    /// error. Returns the new rules version.
    pub fn reload_rules(&self) -> Result<String, RuleError> {
        let Some(path) = &self.rules_path else {
            return Err(RuleError::Io {
                path: "<none>".into(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "no rules path configured"),
            });
        };
        let fresh = Arc::new(CompiledRuleSet::from_file(path)?);
        let version = fresh.version().to_string();
        self.swap_rules(fresh);
        Ok(version)
    }
}

/// Exported model when configured, otherwise the bundled reference scorer.
pub fn build_scorer(cfg: &ServiceConfig) -> Result<Arc<dyn Scorer>, ScoreError> {
    Ok(match &cfg.model_path {
        Some(dir) => Arc::new(load_exported_model(dir)?),
        None => Arc::new(bundled_reference_scorer()),
    })
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/moderate", post(moderate))
        .route("/v1/feedback", post(feedback))
        .route("/v1/health", get(health))
        .with_state(state)
}

async fn moderate(
    State(state): State<Arc<AppState>>,
    body: Result<Json<ModerateRequest>, JsonRejection>,
) -> Result<Json<VerdictView>, ApiError> {
    let Json(req) = body?;
    if req.text.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "text must not be empty"));
    }
    if req.text.chars().count() > MAX_TEXT_CHARS {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            format!("text exceeds {MAX_TEXT_CHARS} characters"),
        ));
    }
    let pipeline = state.pipeline();
    let text = req.text;
    let (text, verdict) = tokio::task::spawn_blocking(move || {
        let v = pipeline.decide(&text);
        (text, v)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;

    if let Some(err) = &verdict.error {
        if state.config.fail_policy == FailPolicy::FailClosedBlock {
            return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, format!("scorer unavailable: {err}")));
        }
    }
    let view_verdict = verdict.clone();
    let id = state.cache.insert(CachedVerdict { text, verdict });
    Ok(Json(VerdictView::from_verdict(&view_verdict, Some(id))))
}

async fn feedback(
    State(state): State<Arc<AppState>>,
    body: Result<Json<FeedbackRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<FeedbackResponse>), ApiError> {
    let Json(req) = body?;
    let label = Label::parse_name(&req.reviewer_label).ok_or_else(|| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            format!("invalid reviewer_label {:?} (expected \"hate\" or \"non_hate\")", req.reviewer_label),
        )
    })?;
    if req.reviewer_id.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "reviewer_id must not be empty"));
    }
    let linked = match (&req.verdict_id, req.text, req.verdict) {
        (Some(id), _, _) => {
            let uuid = Uuid::parse_str(id)
                .map_err(|_| ApiError::new(StatusCode::NOT_FOUND, format!("unknown verdict_id {id}")))?;
            state
                .cache
                .get(&uuid)
                .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown verdict_id {id}")))?
        }
        (None, Some(text), Some(verdict)) => {
            verdict
                .check_invariants(state.config.allow_threshold())
                .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e))?;
            CachedVerdict { text, verdict }
        }
        _ => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "supply verdict_id, or both text and verdict",
            ))
        }
    };
    let store = state.store.clone();
    let reviewer = req.reviewer_id;
    let record = tokio::task::spawn_blocking(move || {
        submit_feedback(store.as_ref(), &linked.text, &linked.verdict, label, &reviewer)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
    .map_err(|e| match e {
        FeedbackError::ForeignVerdict(m) => ApiError::new(StatusCode::BAD_REQUEST, m),
        other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, other.to_string()),
    })?;
    Ok((StatusCode::CREATED, Json(FeedbackResponse { feedback_id: record.id })))
}

async fn health(State(state): State<Arc<AppState>>) -> Result<Json<HealthResponse>, ApiError> {
    let pipeline = state.pipeline();
    state
        .store
        .ping()
        .map_err(|e| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, e.to_string()))?;
    Ok(Json(HealthResponse {
        status: "ok".into(),
        rules_version: pipeline.rules().version().to_string(),
        scorer_version: pipeline.scorer_version().to_string(),
    }))
}

/// Binds `0.0.0.0:port` and serves until ctrl-c. SIGHUP reloads the rules file.
pub async fn serve(state: Arc<AppState>, port: u16) -> Result<(), BootError> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    #[cfg(unix)]
    {
        let reload_state = state.clone();
        tokio::spawn(async move {
            use tokio::signal::unix::{signal, SignalKind};
            let Ok(mut hup) = signal(SignalKind::hangup()) else { return };
            while hup.recv().await.is_some() {
                match reload_state.reload_rules() {
                    Ok(v) => tracing::info!(rules_version = %v, "rules reloaded"),
                    Err(e) => tracing::error!(error = %e, "rules reload failed; keeping previous set"),
                }
            }
        });
    }
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
