//! Fixtures and independent oracles shared by the integration tests and the
//! acceptance runner.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use sentistack::corpus::{Corpus, Document, LabelScheme, SplitTag};
use sentistack::learners::{LearnerModel, LogisticModel, MlpModel};
use sentistack::vectorize::FeatureMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn corpus_of(texts: &[String]) -> Corpus {
    let documents = texts
        .iter()
        .enumerate()
        .map(|(i, t)| Document {
            id: format!("d{i}"),
            text: t.clone(),
            label: None,
        })
        .collect();
    Corpus::new(documents, LabelScheme::d2(), SplitTag::Unsplit)
}

/// Random corpus of at most `max_docs` documents over `t0..t{max_terms-1}`,
/// with at least one non-empty document.
pub fn random_corpus(r: &mut impl Rng, max_docs: usize, max_terms: usize) -> Vec<String> {
    let n = r.random_range(1..=max_docs);
    let terms = r.random_range(1..=max_terms);
    let mut docs: Vec<String> = (0..n)
        .map(|_| {
            let len = r.random_range(0..=8);
            (0..len)
                .map(|_| format!("t{}", r.random_range(0..terms)))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    if docs.iter().all(|d| d.is_empty()) {
        docs[0] = "t0".into();
    }
    docs
}

/// Brute-force TF-IDF: term → column of a row-normalized weight table.
/// Returns the per-document maps keyed by term.
pub fn tfidf_oracle(docs: &[String]) -> (BTreeMap<String, f64>, Vec<BTreeMap<String, f64>>) {
    let tokenized: Vec<Vec<String>> = docs
        .iter()
        .map(|d| d.split_whitespace().map(str::to_string).collect())
        .collect();
    let n = docs.len() as f64;
    let mut idf = BTreeMap::new();
    for doc in &tokenized {
        for term in doc {
            if idf.contains_key(term) {
                continue;
            }
            let mut df = 0.0;
            for other in &tokenized {
                if other.contains(term) {
                    df += 1.0;
                }
            }
            idf.insert(term.clone(), ((1.0 + n) / (1.0 + df)).ln() + 1.0);
        }
    }
    let rows = tokenized
        .iter()
        .map(|doc| {
            let mut w = BTreeMap::new();
            for term in doc {
                let mut count = 0.0;
                for t in doc {
                    if t == term {
                        count += 1.0;
                    }
                }
                w.insert(term.clone(), count * idf[term]);
            }
            let mut norm = 0.0;
            for v in w.values() {
                norm += v * v;
            }
            let norm = norm.sqrt();
            if norm > 0.0 {
                for v in w.values_mut() {
                    *v /= norm;
                }
            }
            w
        })
        .collect();
    (idf, rows)
}

/// Max absolute difference between the library's TF-IDF and the oracle.
pub fn tfidf_max_difference(docs: &[String]) -> f64 {
    let corpus = corpus_of(docs);
    let vocab = sentistack::vectorize::fit_tfidf(&corpus, 1).unwrap();
    let x = sentistack::vectorize::transform_tfidf(&corpus, &vocab).unwrap();
    let (idf, rows) = tfidf_oracle(docs);
    assert_eq!(vocab.len(), idf.len());
    let mut worst: f64 = 0.0;
    for (term, w) in &idf {
        worst = worst.max((vocab.idf(term).unwrap() - w).abs());
    }
    for (i, expected) in rows.iter().enumerate() {
        let got = x.row(i).to_dense(x.dim());
        for term in idf.keys() {
            let e = expected.get(term).copied().unwrap_or(0.0);
            worst = worst.max((got[vocab.column(term).unwrap()] - e).abs());
        }
    }
    worst
}

/// Three Gaussian classes (σ = 1) centred on a triangle with side 4.
pub fn blobs(n: usize, seed: u64) -> (FeatureMatrix, Vec<usize>) {
    let centers = [(0.0, 2.31), (-2.0, -1.155), (2.0, -1.155)];
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut r = rng(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % 3;
        let (cx, cy) = centers[c];
        rows.push(vec![cx + noise.sample(&mut r), cy + noise.sample(&mut r)]);
        labels.push(c);
    }
    (FeatureMatrix::from_rows(rows).unwrap(), labels)
}

pub fn random_matrix(r: &mut impl Rng, rows: usize, cols: usize) -> FeatureMatrix {
    FeatureMatrix::from_rows(
        (0..rows)
            .map(|_| (0..cols).map(|_| r.random_range(-1.0..1.0)).collect())
            .collect(),
    )
    .unwrap()
}

pub fn accuracy(a: &[usize], b: &[usize]) -> f64 {
    a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64
}

pub fn predict(model: &LearnerModel, x: &FeatureMatrix) -> Vec<usize> {
    model.predict_label(x).unwrap()
}

/// Relative gradient error used by the checks: `|a - n| / max(|a|, |n|)`,
/// with components whose magnitudes are both below `floor` compared
/// absolutely against `floor`.
pub fn relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

pub fn central_differences(params: &[f64], eps: f64, mut loss: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|k| {
            let orig = p[k];
            p[k] = orig + eps;
            let up = loss(&p);
            p[k] = orig - eps;
            let down = loss(&p);
            p[k] = orig;
            (up - down) / (2.0 * eps)
        })
        .collect()
}

/// Gradient check of softmax regression on a random `rows × cols` problem.
pub fn logistic_gradient_error(seed: u64, rows: usize, cols: usize, classes: usize) -> f64 {
    let mut r = rng(seed);
    let x = random_matrix(&mut r, rows, cols);
    let labels: Vec<usize> = (0..rows).map(|_| r.random_range(0..classes)).collect();
    let l2 = 0.1;
    let mut model = LogisticModel::zeros(cols, classes);
    let params: Vec<f64> = model.parameters().iter().map(|_| r.random_range(-1.0..1.0)).collect();
    model.set_parameters(&params);
    let (_, analytic) = model.loss_and_gradient(&x, &labels, l2);
    let mut probe = model.clone();
    let numeric = central_differences(&params, 1e-5, |p| {
        probe.set_parameters(p);
        probe.loss_and_gradient(&x, &labels, l2).0
    });
    relative_error(&analytic, &numeric, 1e-6)
}

/// Gradient check of a one-hidden-layer network on a random batch.
pub fn mlp_gradient_error(seed: u64, rows: usize, cols: usize, classes: usize) -> f64 {
    let mut r = rng(seed);
    let x = random_matrix(&mut r, rows, cols);
    let labels: Vec<usize> = (0..rows).map(|_| r.random_range(0..classes)).collect();
    let model = MlpModel::init(cols, &[7], classes, seed);
    let params = model.parameters();
    let (_, analytic) = model.loss_and_gradient(&x, &labels);
    let mut probe = model.clone();
    let numeric = central_differences(&params, 1e-5, |p| {
        probe.set_parameters(p);
        probe.loss_and_gradient(&x, &labels).0
    });
    relative_error(&analytic, &numeric, 1e-6)
}

/// Independent metric computation straight from the label lists.
pub struct OracleMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn metric_oracle(gold: &[usize], pred: &[usize], classes: usize) -> OracleMetrics {
    let n = gold.len() as f64;
    let mut correct = 0.0;
    for i in 0..gold.len() {
        if gold[i] == pred[i] {
            correct += 1.0;
        }
    }
    let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
    for c in 0..classes {
        let tp = (0..gold.len()).filter(|&i| gold[i] == c && pred[i] == c).count() as f64;
        let fp = (0..gold.len()).filter(|&i| gold[i] != c && pred[i] == c).count() as f64;
        let fn_ = (0..gold.len()).filter(|&i| gold[i] == c && pred[i] != c).count() as f64;
        let support = tp + fn_;
        let prec = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let rec = if support > 0.0 { tp / support } else { 0.0 };
        let f1 = if prec + rec > 0.0 { 2.0 * prec * rec / (prec + rec) } else { 0.0 };
        p += support / n * prec;
        r += support / n * rec;
        f += support / n * f1;
    }
    OracleMetrics {
        accuracy: correct / n,
        precision: p,
        recall: r,
        f1: f,
    }
}

/// A labeled toy corpus as CSV, for CLI runs.
pub fn toy_csv(n: usize, seed: u64) -> String {
    let vocab = [
        ["fine", "good", "happy", "calm", "okay"],
        ["tired", "sad", "low", "alone", "empty"],
        ["hopeless", "worthless", "pain", "cry", "dark"],
    ];
    let names = ["minimal", "moderate", "severe"];
    let mut r = rng(seed);
    let mut out = String::from("id,text,label\n");
    for i in 0..n {
        let c = i % 3;
        let words: Vec<&str> = (0..8)
            .map(|_| {
                let k = if r.random_bool(0.75) { c } else { (c + 1) % 3 };
                vocab[k][r.random_range(0..5)]
            })
            .collect();
        out.push_str(&format!("p{i},{},{}\n", words.join(" "), names[c]));
    }
    out
}

pub const TOY_LEXICON: &str = "good\t3\nhappy\t3\ncalm\t2\nsad\t-2\nalone\t-2\nhopeless\t-3\nworthless\t-3\npain\t-2\ncry\t-1\n";

/// Mini lexicon with a two-word phrase, for property checks.
pub fn mini_lexicon() -> sentistack::sentiment::Lexicon {
    sentistack::sentiment::Lexicon::from_entries([
        ("good", 3),
        ("bad", -3),
        ("alone", -2),
        ("no fun", -3),
        ("fun", 4),
        ("cool stuff", 3),
    ])
    .unwrap()
}

/// Random text over lexicon words, lexicon-phrase parts and filler.
pub fn random_text(r: &mut impl Rng) -> String {
    const WORDS: [&str; 9] = ["good", "bad", "alone", "no", "fun", "cool", "stuff", "the", "Day"];
    let len = r.random_range(0..12);
    (0..len)
        .map(|_| WORDS[r.random_range(0..WORDS.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

/// Number of randomized concatenations violating
/// `score(A sep B) = score(A) + score(B)`.
pub fn additivity_violations(cases: usize, seed: u64) -> usize {
    use sentistack::sentiment::score_text;
    let lex = mini_lexicon();
    let mut r = rng(seed);
    (0..cases)
        .filter(|_| {
            let (a, b) = (random_text(&mut r), random_text(&mut r));
            let joined = format!("{a} zzsep {b}");
            score_text(&joined, &lex).score != score_text(&a, &lex).score + score_text(&b, &lex).score
        })
        .count()
}

/// 70/30 stratified split of the blob fixture (labels cycle, so taking
/// every row whose index mod 10 is below 7 keeps class proportions).
pub fn blob_split(n: usize, seed: u64) -> (FeatureMatrix, Vec<usize>, FeatureMatrix, Vec<usize>) {
    let (x, y) = blobs(n, seed);
    let (train, test): (Vec<usize>, Vec<usize>) = (0..n).partition(|i| i % 10 < 7);
    let pick = |idx: &[usize]| idx.iter().map(|&i| y[i]).collect::<Vec<_>>();
    (x.select(&train), pick(&train), x.select(&test), pick(&test))
}

/// Shuffled binary labels with a unique-id column appended to two noise
/// features; returns the out-of-fold accuracy of a depth-8 GBM and the
/// 3σ chance band.
pub fn leakage_sentinel(seed: u64) -> (f64, (f64, f64)) {
    use rand::seq::SliceRandom;
    use sentistack::learners::{GbmConfig, LearnerSpec};
    use sentistack::stacking::{build_oof_matrix, StackingConfig};
    let n = 200;
    let mut r = rng(seed);
    let mut labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    labels.shuffle(&mut r);
    let rows = (0..n)
        .map(|i| vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), i as f64])
        .collect();
    let x = FeatureMatrix::from_rows(rows).unwrap();
    let config = StackingConfig {
        bases: vec![LearnerSpec::Gbm(GbmConfig {
            max_depth: 8,
            min_leaf: 1,
            n_iters: 30,
            eta: 0.3,
        })],
        seed,
        ..Default::default()
    };
    let oof = build_oof_matrix(&x, &labels, 2, &config).unwrap();
    let predicted: Vec<usize> = oof
        .matrix
        .to_dense_rows()
        .iter()
        .map(|p| sentistack::learners::argmax(p))
        .collect();
    let sigma = (0.25f64 / n as f64).sqrt();
    (accuracy(&predicted, &labels), (0.5 - 3.0 * sigma, 0.5 + 3.0 * sigma))
}
