//! Unigram TF-IDF with smoothed idf and L2-normalized rows.
//!
//! `idf(t) = ln((1 + N) / (1 + df(t))) + 1`, row weight = raw count × idf.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix::{FeatureMatrix, SparseRow};
use super::tokenize::tokenize;
use crate::corpus::Corpus;
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct StoredVocabulary {
    terms: Vec<String>,
    idf: Vec<f64>,
    doc_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "StoredVocabulary", into = "StoredVocabulary")]
pub struct TfidfVocabulary {
    terms: Vec<String>,
    idf: Vec<f64>,
    doc_count: usize,
    index: HashMap<String, u32>,
}

impl From<StoredVocabulary> for TfidfVocabulary {
    fn from(s: StoredVocabulary) -> Self {
        let index = s
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        TfidfVocabulary {
            terms: s.terms,
            idf: s.idf,
            doc_count: s.doc_count,
            index,
        }
    }
}

impl From<TfidfVocabulary> for StoredVocabulary {
    fn from(v: TfidfVocabulary) -> Self {
        StoredVocabulary {
            terms: v.terms,
            idf: v.idf,
            doc_count: v.doc_count,
        }
    }
}

impl TfidfVocabulary {
    /// Fit on pre-tokenized documents.
    pub fn fit(docs: &[Vec<String>], min_df: usize) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::Fit("cannot fit TF-IDF on an empty corpus".into()));
        }
        let min_df = min_df.max(1);
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in docs {
            let unique: HashSet<&str> = doc.iter().map(String::as_str).collect();
            for t in unique {
                *df.entry(t).or_default() += 1;
            }
        }
        let n = docs.len() as f64;
        let (terms, idf): (Vec<String>, Vec<f64>) = df
            .into_iter()
            .filter(|&(_, count)| count >= min_df)
            .map(|(t, count)| (t.to_string(), ((1.0 + n) / (1.0 + count as f64)).ln() + 1.0))
            .unzip();
        if terms.is_empty() {
            return Err(Error::Fit(format!(
                "no term reaches min_df = {min_df} over {} documents",
                docs.len()
            )));
        }
        Ok(StoredVocabulary {
            terms,
            idf,
            doc_count: docs.len(),
        }
        .into())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn column(&self, term: &str) -> Option<usize> {
        self.index.get(term).map(|&j| j as usize)
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.column(term).map(|j| self.idf[j])
    }

    pub fn idf_weights(&self) -> &[f64] {
        &self.idf
    }

    pub fn transform_tokens(&self, tokens: &[String]) -> SparseRow {
        let mut counts: HashMap<u32, f64> = HashMap::new();
        for t in tokens {
            if let Some(&j) = self.index.get(t) {
                *counts.entry(j).or_default() += 1.0;
            }
        }
        let pairs: Vec<(u32, f64)> = counts
            .into_iter()
            .map(|(j, c)| (j, c * self.idf[j as usize]))
            .collect();
        let mut row = SparseRow::from_pairs(pairs);
        let norm = row.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.values.iter_mut().for_each(|v| *v /= norm);
        }
        row
    }
}

pub fn fit_tfidf(corpus: &Corpus, min_df: usize) -> Result<TfidfVocabulary> {
    let docs: Vec<Vec<String>> = corpus.documents.iter().map(|d| tokenize(&d.text)).collect();
    TfidfVocabulary::fit(&docs, min_df)
}

pub fn transform_tfidf(corpus: &Corpus, vocab: &TfidfVocabulary) -> Result<FeatureMatrix> {
    let rows = corpus
        .documents
        .par_iter()
        .map(|d| vocab.transform_tokens(&tokenize(&d.text)))
        .collect();
    FeatureMatrix::sparse(corpus.ids().map(str::to_string).collect(), vocab.len(), rows)
}
