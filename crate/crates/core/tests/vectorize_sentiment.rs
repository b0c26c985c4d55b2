mod common;

use std::collections::HashMap;

use proptest::prelude::*;
use sentistack::error::Error;
use sentistack::sentiment::{encode_sentiment_features, score_document, score_text, Polarity, SentimentResult};
use sentistack::vectorize::{
    embed_corpus, fit_tfidf, fuse_features, read_embedding_table, tokenize, transform_tfidf,
    write_embedding_table, EmbeddingTable, FeatureMatrix,
};

#[test]
fn tfidf_matches_brute_force_oracle() {
    let mut r = common::rng(2024);
    for _ in 0..100 {
        let docs = common::random_corpus(&mut r, 20, 15);
        let diff = common::tfidf_max_difference(&docs);
        assert!(diff < 1e-10, "{docs:?}: {diff}");
    }
}

#[test]
fn tfidf_worked_example() {
    let corpus = common::corpus_of(&["a b".into(), "a".into()]);
    let vocab = fit_tfidf(&corpus, 1).unwrap();
    assert_eq!(vocab.idf("a"), Some(1.0));
    assert!((vocab.idf("b").unwrap() - (1.5f64.ln() + 1.0)).abs() < 1e-15);
    let x = transform_tfidf(&corpus, &vocab).unwrap();
    let rows = x.to_dense_rows();
    assert!((rows[0][0] - 0.5797386715376657).abs() < 1e-12);
    assert!((rows[0][1] - 0.8148024746671689).abs() < 1e-12);
    assert_eq!(rows[1], vec![1.0, 0.0]);
    assert!(fit_tfidf(&corpus, 3).is_err());
}

#[test]
fn out_of_vocabulary_rows_are_zero() {
    let fit = common::corpus_of(&["a b".into()]);
    let vocab = fit_tfidf(&fit, 1).unwrap();
    let x = transform_tfidf(&common::corpus_of(&["zzz".into()]), &vocab).unwrap();
    assert_eq!(x.to_dense_rows(), vec![vec![0.0, 0.0]]);
}

#[test]
fn embedding_tables_round_trip_and_join() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("emb.jsonl");
    let mut table = EmbeddingTable::new();
    table.insert("d1", vec![0.1, -2.5, 1e-300, 3.0]).unwrap();
    table.insert("d0", vec![1.0 / 3.0, 0.0, -0.0, 7.25]).unwrap();
    table.insert("x", vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    write_embedding_table(&table, &path).unwrap();
    assert_eq!(read_embedding_table(&path).unwrap(), table);

    let corpus = common::corpus_of(&["first".into(), "second".into()]);
    let x = embed_corpus(&corpus, &table).unwrap();
    assert_eq!(x.ids(), &["d0".to_string(), "d1".to_string()]);
    assert_eq!(x.to_dense_rows()[1], vec![0.1, -2.5, 1e-300, 3.0]);

    std::fs::write(&path, "").unwrap();
    let empty = read_embedding_table(&path).unwrap();
    assert!(matches!(embed_corpus(&corpus, &empty), Err(Error::Join(id)) if id == "d0"));

    std::fs::write(&path, "{\"id\":\"a\",\"vec\":[1,2,3,4]}\n{\"id\":\"b\",\"vec\":[1,2,3,4,5]}\n").unwrap();
    assert!(matches!(read_embedding_table(&path), Err(Error::Format { line: 2, .. })));
}

#[test]
fn fusion_appends_the_block() {
    let base = FeatureMatrix::dense(
        vec!["a".into(), "b".into()],
        4,
        vec![vec![1.0, 2.0, 3.0, 4.0], vec![0.0; 4]],
    )
    .unwrap();
    let mut blocks = HashMap::new();
    blocks.insert("a".to_string(), [0.3, 1.0, 0.0, 0.0]);
    assert!(matches!(fuse_features(&base, &blocks, true), Err(Error::Join(id)) if id == "b"));
    blocks.insert("b".to_string(), [0.0, 0.0, 1.0, 0.0]);
    let fused = fuse_features(&base, &blocks, true).unwrap();
    assert_eq!(fused.dim(), 8);
    assert_eq!(fused.to_dense_rows()[0], vec![1.0, 2.0, 3.0, 4.0, 0.3, 1.0, 0.0, 0.0]);
    assert_eq!(fuse_features(&base, &blocks, false).unwrap(), base);
}

#[test]
fn tokenizer_examples() {
    assert_eq!(tokenize("Happy New Years Everyone"), ["happy", "new", "years", "everyone"]);
    assert!(tokenize("").is_empty());
    assert_eq!(tokenize("I can't--stop"), ["i", "can't", "stop"]);
}

#[test]
fn sentiment_thresholds() {
    assert_eq!(Polarity::of_score(1), Polarity::Positive);
    assert_eq!(Polarity::of_score(0), Polarity::Neutral);
    assert_eq!(Polarity::of_score(-1), Polarity::Negative);
    let lex = common::mini_lexicon();
    let r = score_document(&["good", "good", "bad"], &lex);
    assert_eq!((r.score, r.polarity, r.matched), (3, Polarity::Positive, 3));
    assert_eq!(score_text("no fun at all", &lex).score, -3);
    let block = encode_sentiment_features(&SentimentResult {
        score: -23,
        polarity: Polarity::Negative,
        matched: 5,
    });
    assert_eq!(block, [-1.0, 0.0, 0.0, 1.0]);
}

#[test]
fn sentiment_is_additive_over_separated_texts() {
    assert_eq!(common::additivity_violations(200, 5), 0);
}

proptest! {
    #[test]
    fn tfidf_rows_are_unit_or_zero(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let docs = common::random_corpus(&mut r, 12, 10);
        let corpus = common::corpus_of(&docs);
        let x = transform_tfidf(&corpus, &fit_tfidf(&corpus, 1).unwrap()).unwrap();
        for row in x.to_dense_rows() {
            let norm: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn score_magnitude_is_bounded(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let text = common::random_text(&mut r);
        let s = score_text(&text, &common::mini_lexicon());
        prop_assert!(s.score.unsigned_abs() as usize <= 5 * s.matched);
        let b = encode_sentiment_features(&s);
        prop_assert_eq!(b[1] + b[2] + b[3], 1.0);
    }
}
