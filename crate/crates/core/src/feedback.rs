//! Layer 3: reviewer feedback on issued verdicts.
//!
//! Records are append-only. The bundled store is a single SQLite file in WAL
//! mode with triggers that reject `UPDATE` and `DELETE`. Writes go through one
//! connection behind a mutex, so concurrent submits are serialized.

use std::collections::HashSet;
use std::path::Path;
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use rusqlite::{params, Connection, OptionalExtension};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use crate::dataset::{Label, LabeledSample};
use crate::decision::{Action, Layer, Verdict};
use crate::normalize::normalize;

pub const FEEDBACK_SOURCE: &str = "feedback";

#[derive(Debug, Error)]
pub enum FeedbackError {
    #[error("feedback store: {0}")]
    Store(#[from] rusqlite::Error),
    #[error("stored record {id} is corrupt: {message}")]
    Corrupt { id: String, message: String },
    #[error("verdict was not issued by this system: {0}")]
    ForeignVerdict(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub id: Uuid,
    pub text: String,
    pub verdict: Verdict,
    pub reviewer_label: Label,
    pub agrees_with_model: bool,
    pub reviewer_id: String,
    pub submitted_at: DateTime<Utc>,
}

impl FeedbackRecord {
    /// The reviewer agrees when they call blocked content hate or allowed
    /// content non-hate.
    pub fn agreement(verdict: &Verdict, label: Label) -> bool {
        label.is_hate() == (verdict.action == Action::Block)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeedbackFilter {
    pub since: Option<DateTime<Utc>>,
    pub layer: Option<Layer>,
    pub agreement: Option<bool>,
    /// `None` returns every match.
    pub limit: Option<usize>,
}

impl FeedbackFilter {
    pub fn disagreements() -> Self {
        Self {
            agreement: Some(false),
            ..Self::default()
        }
    }

    pub fn with_limit(mut self, limit: usize) -> Self {
        self.limit = Some(limit);
        self
    }
}

/// Persistence behind the feedback layer.
pub trait FeedbackStore: Send + Sync {
    /// Durably stores a new record. Fails without partial writes.
    fn append(&self, record: &FeedbackRecord) -> Result<(), FeedbackError>;

    /// Matching records, newest first.
    fn query(&self, filter: &FeedbackFilter) -> Result<Vec<FeedbackRecord>, FeedbackError>;

    fn get(&self, id: Uuid) -> Result<Option<FeedbackRecord>, FeedbackError>;

    /// Cheap liveness probe.
    fn ping(&self) -> Result<(), FeedbackError> {
        Ok(())
    }
}

pub fn submit_feedback(
    store: &dyn FeedbackStore,
    text: &str,
    verdict: &Verdict,
    reviewer_label: Label,
    reviewer_id: &str,
) -> Result<FeedbackRecord, FeedbackError> {
    if verdict.scorer_version.is_empty() {
        return Err(FeedbackError::ForeignVerdict("missing scorer_version".into()));
    }
    let record = FeedbackRecord {
        id: Uuid::new_v4(),
        text: text.to_string(),
        verdict: verdict.clone(),
        reviewer_label,
        agrees_with_model: FeedbackRecord::agreement(verdict, reviewer_label),
        reviewer_id: reviewer_id.to_string(),
        submitted_at: Utc::now().max(verdict.decided_at),
    };
    store.append(&record)?;
    Ok(record)
}

pub fn query_feedback(store: &dyn FeedbackStore, filter: &FeedbackFilter) -> Result<Vec<FeedbackRecord>, FeedbackError> {
    store.query(filter)
}

/// Reviewer-labelled samples in the dataset schema, newest first, with one
/// sample per normalized text (the newest label wins).
pub fn export_training_batch(
    store: &dyn FeedbackStore,
    filter: &FeedbackFilter,
) -> Result<Vec<LabeledSample>, FeedbackError> {
    let records = store.query(filter)?;
    let mut seen = HashSet::new();
    Ok(records
        .into_iter()
        .filter(|r| seen.insert(normalize(&r.text).into_string()))
        .map(|r| LabeledSample::new(r.text, r.reviewer_label, FEEDBACK_SOURCE))
        .collect())
}

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS feedback (
    seq               INTEGER PRIMARY KEY AUTOINCREMENT,
    id                TEXT NOT NULL UNIQUE,
    text              TEXT NOT NULL,
    verdict_json      TEXT NOT NULL,
    layer             TEXT NOT NULL,
    reviewer_label    TEXT NOT NULL,
    agrees_with_model INTEGER NOT NULL,
    reviewer_id       TEXT NOT NULL,
    submitted_at      TEXT NOT NULL,
    submitted_at_ns   INTEGER NOT NULL
);
CREATE INDEX IF NOT EXISTS feedback_submitted ON feedback (submitted_at_ns DESC, seq DESC);
CREATE TRIGGER IF NOT EXISTS feedback_no_update BEFORE UPDATE ON feedback
BEGIN SELECT RAISE(ABORT, 'feedback is append-only'); END;
CREATE TRIGGER IF NOT EXISTS feedback_no_delete BEFORE DELETE ON feedback
BEGIN SELECT RAISE(ABORT, 'feedback is append-only'); END;
";

pub struct SqliteFeedbackStore {
    conn: Mutex<Connection>,
}

impl std::fmt::Debug for SqliteFeedbackStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SqliteFeedbackStore").finish_non_exhaustive()
    }
}

impl SqliteFeedbackStore {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, FeedbackError> {
        let conn = Connection::open(path)?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        conn.pragma_update(None, "synchronous", "FULL")?;
        Self::init(conn)
    }

    pub fn open_in_memory() -> Result<Self, FeedbackError> {
        Self::init(Connection::open_in_memory()?)
    }

    fn init(conn: Connection) -> Result<Self, FeedbackError> {
        conn.busy_timeout(std::time::Duration::from_secs(5))?;
        conn.execute_batch(SCHEMA)?;
        Ok(Self { conn: Mutex::new(conn) })
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Connection> {
        self.conn.lock().unwrap_or_else(|p| p.into_inner())
    }
}

fn nanos(t: &DateTime<Utc>) -> i64 {
    t.timestamp_nanos_opt().unwrap_or(i64::MAX)
}

type Row = (String, String, String, String, bool, String, String);

fn row_to_record(row: Row) -> Result<FeedbackRecord, FeedbackError> {
    let (id, text, verdict_json, label, agrees, reviewer_id, submitted_at) = row;
    let corrupt = |message: String| FeedbackError::Corrupt { id: id.clone(), message };
    Ok(FeedbackRecord {
        id: Uuid::parse_str(&id).map_err(|e| corrupt(e.to_string()))?,
        verdict: serde_json::from_str(&verdict_json).map_err(|e| corrupt(e.to_string()))?,
        reviewer_label: Label::parse_name(&label).ok_or_else(|| corrupt(format!("label {label:?}")))?,
        agrees_with_model: agrees,
        submitted_at: DateTime::parse_from_rfc3339(&submitted_at)
            .map_err(|e| corrupt(e.to_string()))?
            .with_timezone(&Utc),
        text,
        reviewer_id,
    })
}

const SELECT_COLUMNS: &str = "SELECT id, text, verdict_json, reviewer_label, agrees_with_model, reviewer_id, submitted_at FROM feedback";

impl FeedbackStore for SqliteFeedbackStore {
    fn append(&self, record: &FeedbackRecord) -> Result<(), FeedbackError> {
        let verdict_json = serde_json::to_string(&record.verdict).expect("verdict serializes");
        let mut conn = self.lock();
        let tx = conn.transaction()?;
        tx.execute(
            "INSERT INTO feedback (id, text, verdict_json, layer, reviewer_label, agrees_with_model, reviewer_id, submitted_at, submitted_at_ns)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9)",
            params![
                record.id.to_string(),
                record.text,
                verdict_json,
                record.verdict.layer.as_str(),
                record.reviewer_label.as_str(),
                record.agrees_with_model,
                record.reviewer_id,
                record.submitted_at.to_rfc3339_opts(chrono::SecondsFormat::Nanos, true),
                nanos(&record.submitted_at),
            ],
        )?;
        tx.commit()?;
        Ok(())
    }

    fn query(&self, filter: &FeedbackFilter) -> Result<Vec<FeedbackRecord>, FeedbackError> {
        let mut sql = format!("{SELECT_COLUMNS} WHERE 1=1");
        let mut args: Vec<Box<dyn rusqlite::ToSql>> = Vec::new();
        if let Some(since) = &filter.since {
            sql.push_str(" AND submitted_at_ns >= ?");
            args.push(Box::new(nanos(since)));
        }
        if let Some(layer) = filter.layer {
            sql.push_str(" AND layer = ?");
            args.push(Box::new(layer.as_str()));
        }
        if let Some(agree) = filter.agreement {
            sql.push_str(" AND agrees_with_model = ?");
            args.push(Box::new(agree));
        }
        sql.push_str(" ORDER BY submitted_at_ns DESC, seq DESC");
        if let Some(limit) = filter.limit {
            sql.push_str(" LIMIT ?");
            args.push(Box::new(i64::try_from(limit).unwrap_or(i64::MAX)));
        }
        let conn = self.lock();
        let mut stmt = conn.prepare(&sql)?;
        let rows = stmt.query_map(rusqlite::params_from_iter(args.iter().map(|a| a.as_ref())), |r| {
            Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?, r.get(4)?, r.get(5)?, r.get(6)?))
        })?;
        rows.map(|r| row_to_record(r?)).collect()
    }

    fn get(&self, id: Uuid) -> Result<Option<FeedbackRecord>, FeedbackError> {
        let conn = self.lock();
        let row: Option<Row> = conn
            .query_row(&format!("{SELECT_COLUMNS} WHERE id = ?1"), [id.to_string()], |r| {
                Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?, r.get(4)?, r.get(5)?, r.get(6)?))
            })
            .optional()?;
        row.map(row_to_record).transpose()
    }

    fn ping(&self) -> Result<(), FeedbackError> {
        self.lock().query_row("SELECT 1", [], |_| Ok(()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalize::normalize;
    use crate::scorer::HateScore;

    fn verdict(action: Action) -> Verdict {
        let (layer, score) = match action {
            Action::Block => (Layer::AiDetection, 0.8),
            Action::Allow => (Layer::None, 0.1),
        };
        Verdict {
            action,
            score: HateScore::new(score).unwrap(),
            layer,
            rule_hits: vec![],
            normalized_text: normalize("some text"),
            scorer_version: "ref-test".into(),
            decided_at: Utc::now(),
            error: None,
        }
    }

    #[test]
    fn derived_agreement() {
        let store = SqliteFeedbackStore::open_in_memory().unwrap();
        let r = submit_feedback(&store, "x", &verdict(Action::Block), Label::NonHate, "rev").unwrap();
        assert!(!r.agrees_with_model);
        let r = submit_feedback(&store, "x", &verdict(Action::Allow), Label::NonHate, "rev").unwrap();
        assert!(r.agrees_with_model);
        assert!(r.submitted_at >= r.verdict.decided_at);
    }

    #[test]
    fn two_submissions_distinct_and_retrievable() {
        let store = SqliteFeedbackStore::open_in_memory().unwrap();
        let a = submit_feedback(&store, "a", &verdict(Action::Block), Label::Hate, "r1").unwrap();
        let b = submit_feedback(&store, "b", &verdict(Action::Allow), Label::Hate, "r2").unwrap();
        assert_ne!(a.id, b.id);
        assert_eq!(store.get(a.id).unwrap().unwrap(), a);
        assert_eq!(store.get(b.id).unwrap().unwrap(), b);
        assert_eq!(store.get(Uuid::new_v4()).unwrap(), None);
    }

    #[test]
    fn empty_store() {
        let store = SqliteFeedbackStore::open_in_memory().unwrap();
        assert!(query_feedback(&store, &FeedbackFilter::default()).unwrap().is_empty());
        assert!(export_training_batch(&store, &FeedbackFilter::default()).unwrap().is_empty());
    }

    #[test]
    fn disagreement_filter_and_limit() {
        let store = SqliteFeedbackStore::open_in_memory().unwrap();
        let mut disagreements = Vec::new();
        for i in 0..3 {
            submit_feedback(&store, &format!("ok {i}"), &verdict(Action::Block), Label::Hate, "r").unwrap();
            disagreements.push(submit_feedback(&store, &format!("bad {i}"), &verdict(Action::Block), Label::NonHate, "r").unwrap());
        }
        let got = query_feedback(&store, &FeedbackFilter::disagreements()).unwrap();
        disagreements.reverse();
        assert_eq!(got, disagreements);
        let newest = query_feedback(&store, &FeedbackFilter::disagreements().with_limit(1)).unwrap();
        assert_eq!(newest, vec![disagreements[0].clone()]);
    }

    #[test]
    fn layer_and_since_filters() {
        let store = SqliteFeedbackStore::open_in_memory().unwrap();
        let first = submit_feedback(&store, "a", &verdict(Action::Allow), Label::Hate, "r").unwrap();
        let second = submit_feedback(&store, "b", &verdict(Action::Block), Label::Hate, "r").unwrap();
        let by_layer = FeedbackFilter { layer: Some(Layer::None), ..Default::default() };
        assert_eq!(query_feedback(&store, &by_layer).unwrap(), vec![first.clone()]);
        let since = FeedbackFilter { since: Some(second.submitted_at), ..Default::default() };
        assert_eq!(query_feedback(&store, &since).unwrap(), vec![second]);
    }

    #[test]
    fn export_dedups_keeping_newest_label() {
        let store = SqliteFeedbackStore::open_in_memory().unwrap();
        let v = verdict(Action::Block);
        submit_feedback(&store, "Same Text", &v, Label::Hate, "r").unwrap();
        submit_feedback(&store, "one", &v, Label::Hate, "r").unwrap();
        submit_feedback(&store, "two", &v, Label::NonHate, "r").unwrap();
        submit_feedback(&store, "same   text @bob", &v, Label::NonHate, "r").unwrap();
        submit_feedback(&store, "three", &v, Label::Hate, "r").unwrap();
        let batch = export_training_batch(&store, &FeedbackFilter::default()).unwrap();
        assert_eq!(batch.len(), 4);
        let shared: Vec<_> = batch.iter().filter(|s| normalize(&s.text).as_str() == "same text").collect();
        assert_eq!(shared.len(), 1);
        assert_eq!(shared[0].label, Label::NonHate);
        assert!(batch.iter().all(|s| s.source == FEEDBACK_SOURCE));
    }

    #[test]
    fn all_agreement_store_exports_nothing_for_disagreements() {
        let store = SqliteFeedbackStore::open_in_memory().unwrap();
        submit_feedback(&store, "a", &verdict(Action::Block), Label::Hate, "r").unwrap();
        submit_feedback(&store, "b", &verdict(Action::Allow), Label::NonHate, "r").unwrap();
        assert!(export_training_batch(&store, &FeedbackFilter::disagreements()).unwrap().is_empty());
    }

    #[test]
    fn store_rejects_mutation() {
        let store = SqliteFeedbackStore::open_in_memory().unwrap();
        submit_feedback(&store, "a", &verdict(Action::Block), Label::Hate, "r").unwrap();
        let conn = store.lock();
        assert!(conn.execute("UPDATE feedback SET text = 'b'", []).is_err());
        assert!(conn.execute("DELETE FROM feedback", []).is_err());
    }

    #[test]
    fn foreign_verdict_rejected() {
        let store = SqliteFeedbackStore::open_in_memory().unwrap();
        let mut v = verdict(Action::Block);
        v.scorer_version.clear();
        assert!(matches!(
            submit_feedback(&store, "a", &v, Label::Hate, "r"),
            Err(FeedbackError::ForeignVerdict(_))
        ));
    }
}
