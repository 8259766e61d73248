//! WordPiece tokenizer driven by a JSON vocabulary file (`tokenizer.json` in an
//! exported model directory).
//!
//! ```json
//! {
//!   "kind": "wordpiece",
//!   "vocab": ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "hello", "##s"],
//!   "unk_token": "[UNK]",
//!   "cls_token": "[CLS]",
//!   "sep_token": "[SEP]",
//!   "continuation_prefix": "##",
//!   "max_length": 128
//! }
//! ```
//!
//! Token ids are vocabulary positions. Input is already normalized; it is
//! split on whitespace and ASCII punctuation other than `#` and `_`, then
//! each piece is encoded by greedy longest-match-first.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::ScoreError;

const MAX_CHARS_PER_WORD: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerSpec {
    pub kind: String,
    pub vocab: Vec<String>,
    pub unk_token: String,
    pub cls_token: String,
    pub sep_token: String,
    #[serde(default = "default_prefix")]
    pub continuation_prefix: String,
    pub max_length: usize,
}

fn default_prefix() -> String {
    "##".into()
}

#[derive(Debug, Clone)]
pub struct WordPieceTokenizer {
    spec: TokenizerSpec,
    ids: HashMap<String, i64>,
    unk: i64,
    cls: i64,
    sep: i64,
}

impl WordPieceTokenizer {
    pub fn new(spec: TokenizerSpec) -> Result<Self, ScoreError> {
        if spec.kind != "wordpiece" {
            return Err(ScoreError::Corrupt(format!("unsupported tokenizer kind {:?}", spec.kind)));
        }
        if spec.max_length < 2 {
            return Err(ScoreError::Corrupt("tokenizer max_length must be at least 2".into()));
        }
        let mut ids = HashMap::with_capacity(spec.vocab.len());
        for (i, tok) in spec.vocab.iter().enumerate() {
            if ids.insert(tok.clone(), i as i64).is_some() {
                return Err(ScoreError::Corrupt(format!("duplicate vocabulary entry {tok:?}")));
            }
        }
        let lookup = |t: &str| {
            ids.get(t)
                .copied()
                .ok_or_else(|| ScoreError::Corrupt(format!("special token {t:?} missing from vocabulary")))
        };
        let (unk, cls, sep) = (lookup(&spec.unk_token)?, lookup(&spec.cls_token)?, lookup(&spec.sep_token)?);
        Ok(Self { spec, ids, unk, cls, sep })
    }

    pub fn spec(&self) -> &TokenizerSpec {
        &self.spec
    }

    pub fn vocab_size(&self) -> usize {
        self.spec.vocab.len()
    }

    /// `[CLS] pieces... [SEP]`, truncated to `max_length`.
    pub fn encode(&self, text: &str) -> Vec<i64> {
        let budget = self.spec.max_length - 2;
        let mut out = vec![self.cls];
        'words: for word in pre_tokenize(text) {
            for id in self.word_pieces(word) {
                if out.len() - 1 == budget {
                    break 'words;
                }
                out.push(id);
            }
        }
        out.push(self.sep);
        out
    }

    fn word_pieces(&self, word: &str) -> Vec<i64> {
        if word.chars().count() > MAX_CHARS_PER_WORD {
            return vec![self.unk];
        }
        let mut pieces = Vec::new();
        let mut start = 0;
        while start < word.len() {
            let mut end = word.len();
            let mut found = None;
            while end > start {
                let piece = &word[start..end];
                let key = if start > 0 {
                    format!("{}{}", self.spec.continuation_prefix, piece)
                } else {
                    piece.to_string()
                };
                if let Some(&id) = self.ids.get(&key) {
                    found = Some(id);
                    break;
                }
                end = word[..end].char_indices().next_back().map_or(start, |(i, _)| i);
            }
            match found {
                Some(id) => {
                    pieces.push(id);
                    start = end;
                }
                None => return vec![self.unk],
            }
        }
        pieces
    }
}

fn is_split_punct(c: char) -> bool {
    c.is_ascii_punctuation() && c != '#' && c != '_'
}

fn pre_tokenize(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let mut start = 0;
        for (i, c) in chunk.char_indices() {
            if is_split_punct(c) {
                if start < i {
                    out.push(&chunk[start..i]);
                }
                out.push(&chunk[i..i + c.len_utf8()]);
                start = i + c.len_utf8();
            }
        }
        if start < chunk.len() {
            out.push(&chunk[start..]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok(max_length: usize) -> WordPieceTokenizer {
        let vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "hello", "world", "un", "##believ", "##able", "!", "#tag"];
        WordPieceTokenizer::new(TokenizerSpec {
            kind: "wordpiece".into(),
            vocab: vocab.iter().map(|s| s.to_string()).collect(),
            unk_token: "[UNK]".into(),
            cls_token: "[CLS]".into(),
            sep_token: "[SEP]".into(),
            continuation_prefix: "##".into(),
            max_length,
        })
        .unwrap()
    }

    #[test]
    fn encodes_with_specials() {
        assert_eq!(tok(16).encode("hello world!"), vec![2, 4, 5, 9, 3]);
        assert_eq!(tok(16).encode(""), vec![2, 3]);
    }

    #[test]
    fn greedy_longest_match() {
        assert_eq!(tok(16).encode("unbelievable"), vec![2, 6, 7, 8, 3]);
        assert_eq!(tok(16).encode("unbelievably"), vec![2, 1, 3]);
    }

    #[test]
    fn hashtags_stay_whole() {
        assert_eq!(tok(16).encode("#tag"), vec![2, 10, 3]);
    }

    #[test]
    fn truncates_to_max_length() {
        assert_eq!(tok(4).encode("hello world hello"), vec![2, 4, 5, 3]);
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = tok(8).spec().clone();
        spec.vocab.retain(|t| t != "[SEP]");
        assert!(WordPieceTokenizer::new(spec).is_err());
        let mut spec = tok(8).spec().clone();
        spec.kind = "bpe".into();
        assert!(WordPieceTokenizer::new(spec).is_err());
    }
}
