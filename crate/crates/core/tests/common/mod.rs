//! Independent oracles and generators shared by the integration tests and the
//! acceptance harness. Nothing here calls into the code under test except to
//! build inputs.

#![allow(dead_code)]

use hatemod::dataset::{Label, LabeledSample};
use hatemod::normalize::{normalize, EmojiTable, NormalizedText};
use hatemod::rules::{RuleCategory, RuleEntry, RuleKind};
use rand::seq::SliceRandom;
use rand::Rng;

// ---------------------------------------------------------------- decision

/// Expected `(action, layer)` for a score and rule flag, written straight
/// from the decision table with a fixed 0.40 threshold. Scores are compared
/// in hundredths to keep the table's two-decimal bands exact.
pub fn table_cell(p_hundredths: u32, rule_hit: bool) -> (&'static str, &'static str) {
    if rule_hit {
        return ("block", "rule_based");
    }
    match p_hundredths {
        0..=39 => ("allow", "none"),
        40..=100 => ("block", "ai_detection"),
        _ => unreachable!(),
    }
}

// ---------------------------------------------------------------- metrics

/// Accuracy, macro F1 and MCC recomputed from expanded prediction/label
/// vectors. MCC is the Pearson correlation of the two 0/1 vectors.
pub fn metrics_oracle(tp: u64, fp: u64, tn: u64, fn_: u64) -> (f64, f64, f64) {
    let mut pred = Vec::new();
    let mut act = Vec::new();
    for (p, a, k) in [(1.0, 1.0, tp), (1.0, 0.0, fp), (0.0, 0.0, tn), (0.0, 1.0, fn_)] {
        for _ in 0..k {
            pred.push(p);
            act.push(a);
        }
    }
    let n = pred.len() as f64;
    let correct = pred.iter().zip(&act).filter(|(p, a)| p == a).count() as f64;
    let acc = correct / n;

    let class_f1 = |class: f64| {
        let predicted = pred.iter().filter(|&&p| p == class).count() as f64;
        let actual = act.iter().filter(|&&a| a == class).count() as f64;
        let hit = pred.iter().zip(&act).filter(|(p, a)| **p == class && **a == class).count() as f64;
        let precision = if predicted == 0.0 { 0.0 } else { hit / predicted };
        let recall = if actual == 0.0 { 0.0 } else { hit / actual };
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    };
    let macro_f1 = (class_f1(1.0) + class_f1(0.0)) / 2.0;

    let mp = pred.iter().sum::<f64>() / n;
    let ma = act.iter().sum::<f64>() / n;
    let (mut cov, mut vp, mut va) = (0.0, 0.0, 0.0);
    for (p, a) in pred.iter().zip(&act) {
        cov += (p - mp) * (a - ma);
        vp += (p - mp) * (p - mp);
        va += (a - ma) * (a - ma);
    }
    let mcc = if vp == 0.0 || va == 0.0 { 0.0 } else { cov / (vp.sqrt() * va.sqrt()) };
    (acc, macro_f1, mcc)
}

/// A random matrix with each cell in `0..=max`, zero with probability 1/5,
/// and a positive total.
pub fn random_matrix(rng: &mut impl Rng, max: u64) -> [u64; 4] {
    loop {
        let mut cells = [0u64; 4];
        for c in &mut cells {
            if rng.gen_range(0..5) != 0 {
                *c = rng.gen_range(0..=max);
            }
        }
        if cells.iter().sum::<u64>() > 0 {
            return cells;
        }
    }
}

// ---------------------------------------------------------------- rules

const SYLLABLES: &[&str] = &["ka", "lo", "mi", "ne", "ru", "ta", "ak", "om"];

fn token(rng: &mut impl Rng) -> String {
    let n = rng.gen_range(1..=2);
    (0..n).map(|_| *SYLLABLES.choose(rng).unwrap()).collect()
}

/// Random lexicon over a tiny vocabulary so that hits, overlaps and shared
/// patterns are frequent.
pub fn random_lexicon(rng: &mut impl Rng, n: usize) -> Vec<RuleEntry> {
    (0..n)
        .map(|i| {
            let id = format!("r{i:04}");
            match rng.gen_range(0..20) {
                0..=11 => {
                    let words = rng.gen_range(1..=2);
                    let p: Vec<String> = (0..words).map(|_| token(rng)).collect();
                    RuleEntry::new(id, RuleCategory::HateTerm, RuleKind::Term, p.join(" "))
                }
                12..=17 => RuleEntry::new(
                    id,
                    RuleCategory::ExtremistHashtag,
                    RuleKind::Hashtag,
                    format!("#{}", token(rng)),
                ),
                _ => {
                    let a = token(rng);
                    let b = token(rng);
                    let pattern = match rng.gen_range(0..3) {
                        0 => format!(r"\b{a}\d+\b"),
                        1 => format!(r"{a}[- ]?{b}"),
                        _ => format!(r"\(\({a}\)\)"),
                    };
                    RuleEntry::new(id, RuleCategory::CodedExpression, RuleKind::Regex, pattern)
                }
            }
        })
        .collect()
}

/// Random normalized text built from the lexicon vocabulary, hashtags,
/// digits and punctuation.
pub fn random_rule_text(rng: &mut impl Rng, max_tokens: usize) -> NormalizedText {
    let n = rng.gen_range(0..=max_tokens);
    let mut s = String::new();
    for i in 0..n {
        if i > 0 {
            s.push_str([" ", " ", " ", ", ", "-", "."].choose(rng).unwrap());
        }
        match rng.gen_range(0..10) {
            0 => s.push('#'),
            1 => s.push_str("(("),
            _ => {}
        }
        s.push_str(&token(rng));
        match rng.gen_range(0..10) {
            0 => s.push_str(&rng.gen_range(0..100).to_string()),
            1 => s.push_str("))"),
            2 => s.push('_'),
            _ => {}
        }
    }
    normalize(&s)
}

fn oracle_token_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '#'
}

/// Naive per-rule scan: for each rule, its leftmost delimited occurrence.
/// Returns hits in the engine's documented order: literal hits by
/// (start, rule position), then regex hits in rule order.
pub fn naive_scan(rules: &[RuleEntry], compiled_regexes: &[Option<regex::Regex>], text: &str) -> Vec<(String, usize, usize)> {
    let mut literal = Vec::new();
    let mut regex_hits = Vec::new();
    for (idx, rule) in rules.iter().enumerate() {
        match rule.kind {
            RuleKind::Term | RuleKind::Hashtag => {
                let p = rule.pattern.as_str();
                for (start, _) in text.char_indices() {
                    if !text[start..].starts_with(p) {
                        continue;
                    }
                    let end = start + p.len();
                    let before = text[..start].chars().last().is_none_or(|c| !oracle_token_char(c));
                    let after = text[end..].chars().next().is_none_or(|c| !oracle_token_char(c));
                    if before && after {
                        literal.push((start, idx, end));
                        break;
                    }
                }
            }
            RuleKind::Regex => {
                let re = compiled_regexes[idx].as_ref().unwrap();
                if let Some(m) = re.find(text) {
                    regex_hits.push((rule.id.clone(), m.start(), m.end()));
                }
            }
        }
    }
    literal.sort();
    literal
        .into_iter()
        .map(|(s, idx, e)| (rules[idx].id.clone(), s, e))
        .chain(regex_hits)
        .collect()
}

pub fn compile_oracle_regexes(rules: &[RuleEntry]) -> Vec<Option<regex::Regex>> {
    rules
        .iter()
        .map(|r| (r.kind == RuleKind::Regex).then(|| regex::Regex::new(&r.pattern).unwrap()))
        .collect()
}

// ---------------------------------------------------------------- normalizer

pub const INJECT_URLS: &[&str] = &[
    "https://t.co/abc123",
    "http://example.com/path?q=1&r=@x",
    "www.example.org/a/b",
    "https://example.com",
];
pub const INJECT_MENTIONS: &[&str] = &["@user", "@some_one", "@x1", "@émile"];
pub const INJECT_EMOJI: &[&str] = &["😀", "🚀", "🇩🇪", "❤️", "👍🏽", "✨", "🤖", "⚽"];

/// Random text with injected URLs, mentions and emoji. Returns the text and
/// the injected fragments.
pub fn seeded_noisy_text(rng: &mut impl Rng) -> (String, Vec<&'static str>) {
    const FILLER: &[&str] =
        &["Hello", "WORLD", "ça", "va", "straße", "İstanbul", "#Tag", "e\u{301}", "x", "42", "?!", "\t", "\n", "  "];
    let mut parts: Vec<String> = Vec::new();
    let mut injected = Vec::new();
    for _ in 0..rng.gen_range(0..12) {
        let piece = match rng.gen_range(0..6) {
            0 => {
                let u = *INJECT_URLS.choose(rng).unwrap();
                injected.push(u);
                u.to_string()
            }
            1 => {
                let m = *INJECT_MENTIONS.choose(rng).unwrap();
                injected.push(m);
                m.to_string()
            }
            2 => {
                let e = *INJECT_EMOJI.choose(rng).unwrap();
                injected.push(e);
                e.to_string()
            }
            _ => FILLER.choose(rng).unwrap().to_string(),
        };
        parts.push(piece);
    }
    let sep = [" ", "", "  ", "\t"];
    let mut text = String::new();
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            text.push_str(sep.choose(rng).unwrap());
        }
        text.push_str(p);
    }
    (text, injected)
}

/// Random text over an alphabet heavy in characters the normalizer treats
/// specially.
pub fn random_unicode_text(rng: &mut impl Rng, max_chars: usize) -> String {
    const POOL: &[char] = &[
        'a', 'B', 'z', 'Z', '0', '_', '#', '@', ' ', '\t', '\n', '\u{a0}', '\u{2003}', '.', '/', ':', 'w', 'W', 'h',
        't', 'p', 's', 'É', 'é', '\u{301}', 'İ', 'ß', 'Σ', '😀', '\u{200d}', '\u{fe0f}', '🇺', '🇸', '\u{1f3fd}', '✨',
        '日', 'Ⅻ', 'ǅ',
    ];
    let n = rng.gen_range(0..=max_chars);
    let mut s: String = (0..n).map(|_| *POOL.choose(rng).unwrap()).collect();
    if rng.gen_bool(0.2) {
        s.push_str("https://x.y/@A");
    }
    if rng.gen_bool(0.2) {
        s.insert_str(0, "www.");
    }
    s
}

/// Oracle for the output invariants: no uppercase-mappable character, no
/// emoji from the bundled table, no URL or mention prefix, collapsed and
/// trimmed whitespace.
pub fn normalized_violations(out: &str) -> Vec<String> {
    let table = EmojiTable::bundled();
    let mut v = Vec::new();
    if out.chars().any(|c| c.to_lowercase().collect::<String>() != c.to_string()) {
        v.push("contains a character with a lowercase mapping".into());
    }
    if out.chars().any(|c| table.contains(c)) {
        v.push("contains an emoji codepoint".into());
    }
    let lower = out.to_string();
    if lower.contains("http://") || lower.contains("https://") || lower.contains("www.") {
        v.push("contains a URL prefix".into());
    }
    let chars: Vec<char> = out.chars().collect();
    for w in chars.windows(2) {
        if w[0] == '@' && (w[1].is_alphanumeric() || w[1] == '_' || is_mark(w[1])) {
            v.push("contains a mention".into());
            break;
        }
    }
    if out.starts_with(char::is_whitespace) || out.ends_with(char::is_whitespace) {
        v.push("not trimmed".into());
    }
    if out.contains("  ") || out.chars().any(|c| c.is_whitespace() && c != ' ') {
        v.push("whitespace not collapsed".into());
    }
    v
}

fn is_mark(c: char) -> bool {
    // Combining diacritical marks, the only marks the generators emit.
    ('\u{300}'..='\u{36f}').contains(&c)
}

// ---------------------------------------------------------------- datasets

pub fn multiset(samples: &[LabeledSample]) -> Vec<(String, Label, String)> {
    let mut v: Vec<_> = samples.iter().map(|s| (s.text.clone(), s.label, s.source.clone())).collect();
    v.sort_by(|a, b| (&a.0, a.1.as_u8(), &a.2).cmp(&(&b.0, b.1.as_u8(), &b.2)));
    v
}

pub fn hate_ratio(samples: &[LabeledSample]) -> f64 {
    samples.iter().filter(|s| s.label.is_hate()).count() as f64 / samples.len() as f64
}

/// Brute-force apportionment: among all count vectors summing to `n`, the
/// one minimizing total absolute deviation from the quotas, breaking ties by
/// preferring larger counts in earlier positions.
pub fn brute_force_apportion(n: usize, fractions: &[f64; 3]) -> [usize; 3] {
    let mut best: Option<([usize; 3], f64)> = None;
    for a in 0..=n {
        for b in 0..=(n - a) {
            let c = n - a - b;
            let counts = [a, b, c];
            let floors_ok = counts.iter().zip(fractions).all(|(&k, f)| {
                let q = f * n as f64;
                k as f64 >= q.floor() && k as f64 <= q.floor() + 1.0
            });
            if !floors_ok {
                continue;
            }
            let err: f64 = counts.iter().zip(fractions).map(|(&k, f)| (k as f64 - f * n as f64).abs()).sum();
            let better = match &best {
                None => true,
                Some((bc, be)) => err < be - 1e-12 || ((err - be).abs() <= 1e-12 && counts > *bc),
            };
            if better {
                best = Some((counts, err));
            }
        }
    }
    best.unwrap().0
}
