mod common;

use std::collections::HashSet;

use hatemod::dataset::{
    corpus_stats, ingest_csv, largest_remainder, read_csv, stratified_split, unify, unify_with_limit, write_csv,
    write_splits, DatasetError, Label, LabeledSample, SplitSpec,
};
use hatemod::normalize::normalize;
use hatemod::synthetic::separable_corpus;
use proptest::prelude::*;

fn fractions() -> impl Strategy<Value = [f64; 3]> {
    (1u32..100, 1u32..100, 1u32..100).prop_map(|(a, b, c)| {
        let t = f64::from(a + b + c);
        [f64::from(a) / t, f64::from(b) / t, 1.0 - f64::from(a) / t - f64::from(b) / t]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn largest_remainder_matches_brute_force(n in 0usize..80, f in fractions()) {
        prop_assume!(f.iter().all(|x| *x > 0.0));
        let got = largest_remainder(n, &f);
        prop_assert_eq!(got.iter().sum::<usize>(), n);
        prop_assert_eq!(got, common::brute_force_apportion(n, &f).to_vec());
    }

    #[test]
    fn split_is_a_deterministic_partition(n in 20usize..400, seed in any::<u64>(), f in fractions()) {
        prop_assume!(f.iter().all(|x| *x > 0.01));
        let corpus = separable_corpus(n, 0.33, seed, "p");
        let spec = SplitSpec::new(f[0], f[1], f[2], seed).unwrap();
        let Ok(splits) = stratified_split(&corpus, &spec) else { return Ok(()) };
        let all: Vec<_> = splits.train.iter().chain(&splits.val).chain(&splits.test).cloned().collect();
        prop_assert_eq!(common::multiset(&all), common::multiset(&corpus));
        prop_assert_eq!(stratified_split(&corpus, &spec).unwrap(), splits);
    }

    #[test]
    fn unify_output_has_unique_normalized_texts(seed in any::<u64>()) {
        let a = separable_corpus(150, 0.4, seed, "a");
        let b = separable_corpus(150, 0.4, seed.wrapping_add(1), "b");
        let u = unify(&[a, b]);
        let mut seen = HashSet::new();
        for s in &u.samples {
            prop_assert_eq!(normalize(&s.text).into_string(), s.text.clone());
            prop_assert!(seen.insert(s.text.clone()), "duplicate {:?}", s.text);
        }
        let r = &u.report;
        prop_assert_eq!(r.input_count, r.output_count + r.dropped_empty + r.dropped_overlength + r.duplicate_count);
    }

    #[test]
    fn csv_round_trip(rows in prop::collection::vec(("[ -~\n\"]{0,30}", any::<bool>(), "[a-z]{1,6}"), 0..30)) {
        let samples: Vec<_> = rows
            .iter()
            .map(|(t, h, src)| LabeledSample::new(t.clone(), if *h { Label::Hate } else { Label::NonHate }, src.clone()))
            .collect();
        let mut buf = Vec::new();
        write_csv(&mut buf, &samples).unwrap();
        prop_assert_eq!(read_csv(buf.as_slice()).unwrap(), samples);
    }
}

#[test]
fn largest_remainder_examples() {
    assert_eq!(largest_remainder(67, &[0.8, 0.1, 0.1]), [53, 7, 7]);
    assert_eq!(largest_remainder(33, &[0.8, 0.1, 0.1]), [27, 3, 3]);
    assert_eq!(largest_remainder(10, &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]), [4, 3, 3]);
}

#[test]
fn stratification_holds_at_ten_thousand() {
    let corpus = separable_corpus(10_000, 0.33, 11, "s");
    let input = common::hate_ratio(&corpus);
    for spec in [SplitSpec::standard(3), SplitSpec::new(0.8, 0.1, 0.1, 3).unwrap()] {
        let splits = stratified_split(&corpus, &spec).unwrap();
        for (name, part) in splits.parts() {
            let r = common::hate_ratio(part);
            assert!((r - input).abs() <= 0.01, "{name}: {r} vs {input}");
        }
    }
}

#[test]
fn different_seeds_give_different_splits() {
    let corpus = separable_corpus(500, 0.33, 1, "s");
    let a = stratified_split(&corpus, &SplitSpec::new(0.8, 0.1, 0.1, 1).unwrap()).unwrap();
    let b = stratified_split(&corpus, &SplitSpec::new(0.8, 0.1, 0.1, 2).unwrap()).unwrap();
    assert_ne!(a, b);
}

#[test]
fn tiny_class_is_rejected() {
    let corpus = vec![
        LabeledSample::new("a", Label::Hate, "s"),
        LabeledSample::new("b", Label::NonHate, "s"),
        LabeledSample::new("c", Label::NonHate, "s"),
        LabeledSample::new("d", Label::NonHate, "s"),
    ];
    let err = stratified_split(&corpus, &SplitSpec::new(0.8, 0.1, 0.1, 0).unwrap()).unwrap_err();
    assert!(matches!(err, DatasetError::ClassTooSmall { label: Label::Hate, count: 1, needed: 3 }));
}

#[test]
fn invalid_fractions_rejected() {
    assert!(SplitSpec::new(0.5, 0.5, 0.5, 0).is_err());
    assert!(SplitSpec::new(1.0, 0.0, 0.0, 0).is_err());
}

#[test]
fn unify_reports_planted_defects() {
    let long = vec!["word"; 61].join(" ");
    let a = vec![
        LabeledSample::new("Hello World", Label::NonHate, "a"),
        LabeledSample::new(long.clone(), Label::Hate, "a"),
        LabeledSample::new("@only https://mention.url", Label::NonHate, "a"),
    ];
    let b = vec![
        LabeledSample::new("hello   world @bob", Label::Hate, "b"),
        LabeledSample::new("HELLO WORLD", Label::NonHate, "b"),
        LabeledSample::new(vec!["w"; 60].join(" "), Label::Hate, "b"),
    ];
    let u = unify(&[a.clone(), b.clone()]);
    assert_eq!(u.samples.len(), 2);
    assert_eq!(u.samples[0], LabeledSample::new("hello world", Label::NonHate, "a"));
    assert_eq!(u.report.duplicate_count, 2);
    assert_eq!(u.report.label_conflicts, 1);
    assert_eq!(u.report.dropped_overlength, 1);
    assert_eq!(u.report.dropped_empty, 1);
    assert_eq!(unify_with_limit(&[a, b], 1000).report.dropped_overlength, 0);

    let stats = corpus_stats(&[
        LabeledSample::new("x", Label::Hate, "s"),
        LabeledSample::new("X", Label::NonHate, "s"),
        LabeledSample::new(long, Label::Hate, "s"),
    ]);
    assert_eq!((stats.count, stats.hate, stats.duplicate_count, stats.dropped_overlength), (3, 2, 1, 1));
}

#[test]
fn split_files_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = separable_corpus(300, 0.33, 5, "s");
    let spec = SplitSpec::new(0.8, 0.1, 0.1, 9).unwrap();
    let splits = stratified_split(&corpus, &spec).unwrap();
    let manifest = write_splits(dir.path(), &corpus, &splits, &spec).unwrap();
    assert_eq!(manifest.parts.iter().map(|p| p.count).sum::<usize>(), 300);
    for part in &manifest.parts {
        let path = dir.path().join(&part.file);
        let rows = ingest_csv(&path).unwrap();
        assert_eq!(rows.len(), part.count);
        use sha2::Digest;
        let digest: String = sha2::Sha256::digest(std::fs::read(&path).unwrap()).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(digest, part.sha256);
    }
    let on_disk: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(on_disk["seed"], 9);
}

#[test]
fn malformed_csv_reports_row() {
    let err = read_csv("text,label,source\nfine,1,a\nbroken,yes,a\n".as_bytes()).unwrap_err();
    assert!(matches!(err, DatasetError::Row { row: 3, .. }), "{err}");
    assert!(matches!(read_csv("a,b,c\n".as_bytes()), Err(DatasetError::Header { .. })));
}
