//! Text normalization shared by training-time data preparation and
//! inference-time moderation.
//!
//! The pipeline is, in order:
//!
//! 1. Unicode NFC
//! 2. lowercasing
//! 3. URL removal (`http://`, `https://` or `www.` up to the next whitespace)
//! 4. `@mention` removal (`@` followed by word characters)
//! 5. emoji removal, driven by the codepoint table in `data/emoji_ranges.txt`
//! 6. whitespace collapse and trim
//!
//! Hashtags are kept. The steps are repeated until the output stops changing,
//! since a removal can expose a new match (`"@😀user"` becomes `"@user"`).

use std::fmt;
use std::ops::RangeInclusive;

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

/// Word limit applied by the training-time length filter and by serve-time truncation.
pub const DEFAULT_MAX_WORDS: usize = 60;

const BUNDLED_EMOJI_TABLE: &str = include_str!("../data/emoji_ranges.txt");

// A pass never needs more than a handful of rounds; the cap guards against
// pathological Unicode case mappings.
const MAX_ROUNDS: usize = 16;

static URL_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"(?:https?://|www\.)\S*").unwrap());
static MENTION_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"@\w+").unwrap());
static EMOJI: Lazy<EmojiTable> = Lazy::new(|| {
    EmojiTable::parse(BUNDLED_EMOJI_TABLE).expect("bundled emoji table is well formed")
});

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EmojiTableError {
    #[error("line {line}: malformed codepoint range {text:?}")]
    Malformed { line: usize, text: String },
    #[error("line {line}: range start is after range end")]
    Inverted { line: usize },
}

/// Sorted set of inclusive codepoint ranges.
#[derive(Debug, Clone)]
pub struct EmojiTable {
    ranges: Vec<RangeInclusive<u32>>,
    version: Option<String>,
}

impl EmojiTable {
    /// Parses the `U+XXXX..U+YYYY` per-line format. `#` starts a comment; a
    /// `# version: N` comment sets the table version.
    pub fn parse(text: &str) -> Result<Self, EmojiTableError> {
        let mut ranges = Vec::new();
        let mut version = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if let Some(comment) = trimmed.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("version:") {
                    version = Some(v.trim().to_string());
                }
                continue;
            }
            if trimmed.is_empty() {
                continue;
            }
            let malformed = || EmojiTableError::Malformed {
                line,
                text: trimmed.to_string(),
            };
            let (lo, hi) = match trimmed.split_once("..") {
                Some((a, b)) => (parse_codepoint(a).ok_or_else(malformed)?, parse_codepoint(b).ok_or_else(malformed)?),
                None => {
                    let cp = parse_codepoint(trimmed).ok_or_else(malformed)?;
                    (cp, cp)
                }
            };
            if lo > hi {
                return Err(EmojiTableError::Inverted { line });
            }
            ranges.push(lo..=hi);
        }
        ranges.sort_by_key(|r| *r.start());
        Ok(Self { ranges, version })
    }

    /// The table compiled into the crate.
    pub fn bundled() -> &'static EmojiTable {
        &EMOJI
    }

    pub fn version(&self) -> Option<&str> {
        self.version.as_deref()
    }

    pub fn ranges(&self) -> &[RangeInclusive<u32>] {
        &self.ranges
    }

    pub fn contains(&self, c: char) -> bool {
        let cp = c as u32;
        // Last range starting at or before cp; ranges may overlap, so scan back.
        let end = self.ranges.partition_point(|r| *r.start() <= cp);
        self.ranges[..end].iter().rev().any(|r| r.contains(&cp))
    }
}

fn parse_codepoint(s: &str) -> Option<u32> {
    let hex = s.trim().strip_prefix("U+").or_else(|| s.trim().strip_prefix("u+"))?;
    let cp = u32::from_str_radix(hex, 16).ok()?;
    char::from_u32(cp).map(|_| cp)
}

/// Text that has gone through [`normalize`].
///
/// Holds no characters with a lowercase mapping, no URL, mention or emoji
/// matches, and no leading, trailing or repeated whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Default)]
#[serde(transparent)]
pub struct NormalizedText(String);

impl NormalizedText {
    /// Accepts `s` only if it is already a fixed point of [`normalize`].
    pub fn parse(s: &str) -> Option<Self> {
        let n = normalize(s);
        (n.0 == s).then_some(n)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.0.split_whitespace()
    }

    /// Keeps the first `max_words` words. The result is still normalized.
    pub fn truncate_words(&self, max_words: usize) -> NormalizedText {
        if word_count(self) <= max_words {
            return self.clone();
        }
        NormalizedText(self.words().take(max_words).collect::<Vec<_>>().join(" "))
    }
}

impl fmt::Display for NormalizedText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for NormalizedText {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl<'de> Deserialize<'de> for NormalizedText {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        NormalizedText::parse(&s)
            .ok_or_else(|| serde::de::Error::custom("text is not in normalized form"))
    }
}

/// Normalizes `raw` with the bundled emoji table.
pub fn normalize(raw: &str) -> NormalizedText {
    normalize_with(raw, EmojiTable::bundled())
}

/// Normalizes `raw` with a caller-supplied emoji table.
pub fn normalize_with(raw: &str, emoji: &EmojiTable) -> NormalizedText {
    let mut current = single_pass(raw, emoji);
    for _ in 0..MAX_ROUNDS {
        let next = single_pass(&current, emoji);
        if next == current {
            break;
        }
        current = next;
    }
    NormalizedText(current)
}

fn single_pass(raw: &str, emoji: &EmojiTable) -> String {
    let composed: String = raw.nfc().collect();
    let lowered = composed.to_lowercase();
    let no_urls = URL_RE.replace_all(&lowered, "");
    let no_mentions = MENTION_RE.replace_all(&no_urls, "");
    let no_emoji: String = no_mentions.chars().filter(|c| !emoji.contains(*c)).collect();
    no_emoji.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Number of whitespace-delimited words.
pub fn word_count(text: &NormalizedText) -> usize {
    text.words().count()
}

/// True iff the text has at most `max_words` words; longer texts are rejected.
pub fn passes_length_filter(text: &NormalizedText, max_words: usize) -> bool {
    debug_assert!(max_words >= 1, "max_words must be positive");
    word_count(text) <= max_words
}

/// Checks the invariants promised by [`NormalizedText`] directly, without
/// re-running the pipeline. Used by tests and by callers that receive text
/// from outside.
pub fn satisfies_invariants(s: &str) -> bool {
    let no_upper = s.chars().all(|c| c.to_lowercase().eq(std::iter::once(c)));
    let trimmed = s.trim() == s;
    let single_spaced = !s
        .chars()
        .zip(s.chars().skip(1))
        .any(|(a, b)| a.is_whitespace() && b.is_whitespace())
        && s.chars().all(|c| !c.is_whitespace() || c == ' ');
    let no_patterns = !URL_RE.is_match(s) && !MENTION_RE.is_match(s);
    let no_emoji = !s.chars().any(|c| EmojiTable::bundled().contains(c));
    no_upper && trimmed && single_spaced && no_patterns && no_emoji
}
