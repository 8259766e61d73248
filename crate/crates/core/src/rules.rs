//! Layer 1: lexicon and regex pre-filter.
//!
//! Rules files are UTF-8, one rule per line:
//!
//! ```text
//! id<TAB>category<TAB>kind<TAB>pattern
//! ```
//!
//! Lines starting with `#` are comments and blank lines are skipped.
//! Categories are `profanity`, `hate_term`, `extremist_hashtag` and
//! `coded_expression`; kinds are `term`, `hashtag` and `regex`.
//!
//! Term and hashtag patterns are matched with word-boundary semantics: the
//! characters immediately before and after an occurrence must be absent
//! (start/end of text) or non-token characters. Token characters are Unicode
//! alphanumerics, `_` and `#`, so `hate` does not fire inside `whatever` or
//! inside `#hate`, and `#hate` does not fire inside `#hateful`.
//!
//! Regex patterns use the `regex` crate dialect (RE2-style: no backreferences
//! or lookaround) and are searched leftmost-first over the normalized text
//! without boundary constraints.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use aho_corasick::{AhoCorasick, AhoCorasickBuilder, MatchKind};
use regex::{Regex, RegexSet};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::normalize::{normalize, NormalizedText};

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("failed to read rules file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate rule id {id:?} (first defined on line {first_line})")]
    DuplicateId { id: String, line: usize, first_line: usize },
    #[error("rule {id:?}: {message}")]
    InvalidRule { id: String, message: String },
    #[error("rule {id:?}: regex does not compile: {source}")]
    Regex {
        id: String,
        #[source]
        source: regex::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Term,
    Hashtag,
    Regex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleCategory {
    Profanity,
    HateTerm,
    ExtremistHashtag,
    CodedExpression,
}

impl RuleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleKind::Term => "term",
            RuleKind::Hashtag => "hashtag",
            RuleKind::Regex => "regex",
        }
    }
}

impl RuleCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleCategory::Profanity => "profanity",
            RuleCategory::HateTerm => "hate_term",
            RuleCategory::ExtremistHashtag => "extremist_hashtag",
            RuleCategory::CodedExpression => "coded_expression",
        }
    }
}

impl FromStr for RuleKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "term" => Ok(RuleKind::Term),
            "hashtag" => Ok(RuleKind::Hashtag),
            "regex" => Ok(RuleKind::Regex),
            other => Err(format!("unknown rule kind {other:?}")),
        }
    }
}

impl FromStr for RuleCategory {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "profanity" => Ok(RuleCategory::Profanity),
            "hate_term" => Ok(RuleCategory::HateTerm),
            "extremist_hashtag" => Ok(RuleCategory::ExtremistHashtag),
            "coded_expression" => Ok(RuleCategory::CodedExpression),
            other => Err(format!("unknown rule category {other:?}")),
        }
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for RuleCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleEntry {
    pub id: String,
    pub category: RuleCategory,
    pub kind: RuleKind,
    pub pattern: String,
}

impl RuleEntry {
    pub fn new(id: impl Into<String>, category: RuleCategory, kind: RuleKind, pattern: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            category,
            kind,
            pattern: pattern.into(),
        }
    }

    /// Checks the per-entry invariants that do not need regex compilation.
    pub fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("empty rule id".into());
        }
        if self.pattern.is_empty() {
            return Err("empty pattern".into());
        }
        match self.kind {
            RuleKind::Term | RuleKind::Hashtag => {
                if normalize(&self.pattern).as_str() != self.pattern {
                    return Err(format!(
                        "{} pattern {:?} is not in normalized form (expected {:?})",
                        self.kind,
                        self.pattern,
                        normalize(&self.pattern).as_str()
                    ));
                }
                if self.kind == RuleKind::Hashtag && !self.pattern.starts_with('#') {
                    return Err(format!("hashtag pattern {:?} must start with '#'", self.pattern));
                }
            }
            RuleKind::Regex => {}
        }
        Ok(())
    }
}

/// Reads and parses a rules file, returning entries in file order.
pub fn load_rules(path: impl AsRef<Path>) -> Result<Vec<RuleEntry>, RuleError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| RuleError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_rules(&text)
}

/// Parses rules file contents.
pub fn parse_rules(text: &str) -> Result<Vec<RuleEntry>, RuleError> {
    let mut entries = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = raw.splitn(4, '\t').collect();
        if cols.len() != 4 {
            return Err(RuleError::Parse {
                line,
                message: format!("expected 4 tab-separated columns, found {}", cols.len()),
            });
        }
        let parse_err = |message: String| RuleError::Parse { line, message };
        let category = cols[1].trim().parse::<RuleCategory>().map_err(parse_err)?;
        let kind = cols[2].trim().parse::<RuleKind>().map_err(parse_err)?;
        let entry = RuleEntry::new(cols[0].trim(), category, kind, cols[3]);
        entry.validate().map_err(parse_err)?;
        if let Some(&first_line) = seen.get(&entry.id) {
            return Err(RuleError::DuplicateId {
                id: entry.id,
                line,
                first_line,
            });
        }
        seen.insert(entry.id.clone(), line);
        entries.push(entry);
    }
    Ok(entries)
}

/// Renders entries back into the rules file format.
pub fn render_rules(entries: &[RuleEntry]) -> String {
    entries
        .iter()
        .map(|e| format!("{}\t{}\t{}\t{}\n", e.id, e.category, e.kind, e.pattern))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleHit {
    pub rule_id: String,
    pub category: RuleCategory,
    /// Byte offsets into the normalized text.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub hits: Vec<RuleHit>,
}

impl MatchResult {
    pub fn matched(&self) -> bool {
        !self.hits.is_empty()
    }

    pub fn rule_ids(&self) -> Vec<String> {
        self.hits.iter().map(|h| h.rule_id.clone()).collect()
    }
}

/// Rules compiled for single-pass matching. Immutable once built; reloads
/// construct a new set and swap it in.
#[derive(Debug)]
pub struct CompiledRuleSet {
    entries: Vec<RuleEntry>,
    terms: Option<AhoCorasick>,
    /// Automaton pattern index -> indices into `entries` sharing that pattern.
    term_rules: Vec<Vec<usize>>,
    regex_rules: Vec<usize>,
    regexes: Vec<Regex>,
    regex_set: RegexSet,
    version: String,
}

/// Token characters for boundary checks.
pub fn is_token_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '#'
}

/// True when `text[start..end]` is delimited by non-token characters or the
/// ends of the text.
pub fn on_token_boundary(text: &str, start: usize, end: usize) -> bool {
    let before_ok = text[..start].chars().next_back().is_none_or(|c| !is_token_char(c));
    let after_ok = text[end..].chars().next().is_none_or(|c| !is_token_char(c));
    before_ok && after_ok
}

impl CompiledRuleSet {
    pub fn compile(rules: Vec<RuleEntry>) -> Result<Self, RuleError> {
        let mut seen = HashMap::new();
        for e in &rules {
            e.validate().map_err(|message| RuleError::InvalidRule {
                id: e.id.clone(),
                message,
            })?;
            if seen.insert(e.id.as_str(), ()).is_some() {
                return Err(RuleError::InvalidRule {
                    id: e.id.clone(),
                    message: "duplicate rule id".into(),
                });
            }
        }

        let mut pattern_index: HashMap<&str, usize> = HashMap::new();
        let mut patterns: Vec<&str> = Vec::new();
        let mut term_rules: Vec<Vec<usize>> = Vec::new();
        let mut regex_rules = Vec::new();
        let mut regexes = Vec::new();
        for (i, e) in rules.iter().enumerate() {
            match e.kind {
                RuleKind::Term | RuleKind::Hashtag => {
                    let slot = *pattern_index.entry(e.pattern.as_str()).or_insert_with(|| {
                        patterns.push(e.pattern.as_str());
                        term_rules.push(Vec::new());
                        patterns.len() - 1
                    });
                    term_rules[slot].push(i);
                }
                RuleKind::Regex => {
                    let re = Regex::new(&e.pattern).map_err(|source| RuleError::Regex {
                        id: e.id.clone(),
                        source,
                    })?;
                    regex_rules.push(i);
                    regexes.push(re);
                }
            }
        }

        let terms = if patterns.is_empty() {
            None
        } else {
            Some(
                AhoCorasickBuilder::new()
                    .match_kind(MatchKind::Standard)
                    .build(&patterns)
                    .map_err(|err| RuleError::InvalidRule {
                        id: "<lexicon>".into(),
                        message: err.to_string(),
                    })?,
            )
        };
        let regex_set = RegexSet::new(regexes.iter().map(|r| r.as_str())).map_err(|source| RuleError::Regex {
            id: "<regex set>".into(),
            source,
        })?;

        let version = content_version(&rules);
        Ok(Self {
            entries: rules,
            terms,
            term_rules,
            regex_rules,
            regexes,
            regex_set,
            version,
        })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, RuleError> {
        Self::compile(load_rules(path)?)
    }

    pub fn empty() -> Self {
        Self::compile(Vec::new()).expect("empty rule set always compiles")
    }

    /// Content hash of the rule definitions (comments and blank lines excluded).
    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn entries(&self) -> &[RuleEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Reports every rule that fires on `text`, one hit per rule at its
    /// leftmost qualifying occurrence. Term and hashtag hits come first,
    /// ordered by span start then rule order; regex hits follow in rule order.
    pub fn scan(&self, text: &NormalizedText) -> MatchResult {
        let haystack = text.as_str();
        let mut hits = Vec::new();

        if let Some(ac) = &self.terms {
            let mut first: Vec<Option<(usize, usize)>> = vec![None; self.term_rules.len()];
            for m in ac.find_overlapping_iter(haystack) {
                let slot = m.pattern().as_usize();
                if let Some((s, _)) = first[slot] {
                    if s <= m.start() {
                        continue;
                    }
                }
                if on_token_boundary(haystack, m.start(), m.end()) {
                    first[slot] = Some((m.start(), m.end()));
                }
            }
            let mut term_hits: Vec<(usize, usize, usize)> = Vec::new();
            for (slot, span) in first.iter().enumerate() {
                if let Some((s, e)) = span {
                    term_hits.extend(self.term_rules[slot].iter().map(|&rule| (*s, rule, *e)));
                }
            }
            term_hits.sort_unstable();
            hits.extend(term_hits.into_iter().map(|(start, rule, end)| self.hit(rule, start, end)));
        }

        if !self.regexes.is_empty() {
            for idx in self.regex_set.matches(haystack).iter() {
                if let Some(m) = self.regexes[idx].find(haystack) {
                    hits.push(self.hit(self.regex_rules[idx], m.start(), m.end()));
                }
            }
        }

        MatchResult { hits }
    }

    fn hit(&self, rule: usize, start: usize, end: usize) -> RuleHit {
        let e = &self.entries[rule];
        RuleHit {
            rule_id: e.id.clone(),
            category: e.category,
            start,
            end,
        }
    }
}

fn content_version(rules: &[RuleEntry]) -> String {
    let digest = Sha256::digest(render_rules(rules).as_bytes());
    let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    format!("rules-{hex}")
}

/// Free-function form of [`CompiledRuleSet::scan`].
pub fn match_text(ruleset: &CompiledRuleSet, text: &NormalizedText) -> MatchResult {
    ruleset.scan(text)
}
