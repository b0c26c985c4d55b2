//! AFINN-style lexicon scoring.
//!
//! A document's score is the sum of the valences of the lexicon terms found
//! in its token stream. Matching is greedy: at each position a two-token
//! phrase is tried before the single token, and matched spans never overlap.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vectorize::tokenize;

/// Environment variable naming a default lexicon file.
pub const LEXICON_ENV: &str = "SENTISTACK_LEXICON";

pub const SENTIMENT_BLOCK_WIDTH: usize = 4;

/// `[clamped score / 10, is_positive, is_neutral, is_negative]`
pub type SentimentBlock = [f64; SENTIMENT_BLOCK_WIDTH];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconCounts {
    pub total: usize,
    pub positive: usize,
    pub negative: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    entries: HashMap<String, i32>,
    /// Entries keyed by their tokenized form joined with single spaces, so
    /// that hyphenated and multiword terms line up with tokenizer output.
    phrases: HashMap<String, i32>,
}

impl Lexicon {
    /// Build from (term, score) pairs. Later duplicates replace earlier ones.
    pub fn from_entries<S: AsRef<str>>(pairs: impl IntoIterator<Item = (S, i32)>) -> Result<Self> {
        let mut entries = HashMap::new();
        for (i, (term, score)) in pairs.into_iter().enumerate() {
            check_score(score, i + 1)?;
            entries.insert(term.as_ref().trim().to_lowercase(), score);
        }
        Ok(Self::index(entries))
    }

    fn index(entries: HashMap<String, i32>) -> Self {
        let mut keys: Vec<&String> = entries.keys().collect();
        keys.sort();
        let mut phrases = HashMap::new();
        for term in keys {
            let key = tokenize(term).join(" ");
            if !key.is_empty() {
                phrases.insert(key, entries[term]);
            }
        }
        Lexicon { entries, phrases }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn score_of(&self, term: &str) -> Option<i32> {
        self.entries.get(term).copied()
    }

    pub fn counts(&self) -> LexiconCounts {
        let positive = self.entries.values().filter(|&&s| s > 0).count();
        LexiconCounts {
            total: self.entries.len(),
            positive,
            negative: self.entries.len() - positive,
        }
    }
}

fn check_score(score: i32, line: usize) -> Result<()> {
    if score == 0 || !(-5..=5).contains(&score) {
        return Err(Error::LexiconFormat {
            line,
            message: format!("score {score} outside [-5,-1] ∪ [1,5]"),
        });
    }
    Ok(())
}

/// Parse `term<TAB>score` lines.
pub fn parse_lexicon<R: BufRead>(reader: R) -> Result<Lexicon> {
    let mut entries: HashMap<String, i32> = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::LexiconFormat {
            line: lineno,
            message: e.to_string(),
        })?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let (term, score) = line.rsplit_once('\t').ok_or_else(|| Error::LexiconFormat {
            line: lineno,
            message: "expected `term<TAB>score`".into(),
        })?;
        let score: i32 = score.trim().parse().map_err(|_| Error::LexiconFormat {
            line: lineno,
            message: format!("score `{}` is not an integer", score.trim()),
        })?;
        check_score(score, lineno)?;
        let term = term.trim().to_lowercase();
        if term.is_empty() {
            return Err(Error::LexiconFormat {
                line: lineno,
                message: "empty term".into(),
            });
        }
        if let Some(old) = entries.insert(term.clone(), score) {
            log::warn!("lexicon line {lineno}: duplicate term `{term}` ({old} replaced by {score})");
        }
    }
    Ok(Lexicon::index(entries))
}

pub fn load_lexicon(path: impl AsRef<Path>) -> Result<Lexicon> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_lexicon(BufReader::new(file))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Neutral,
    Negative,
}

impl Polarity {
    pub fn of_score(score: i64) -> Self {
        match score {
            s if s >= 1 => Polarity::Positive,
            s if s <= -1 => Polarity::Negative,
            _ => Polarity::Neutral,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentimentResult {
    pub score: i64,
    pub polarity: Polarity,
    pub matched: usize,
}

/// Score a lower-cased token list against the lexicon.
pub fn score_document<S: AsRef<str>>(tokens: &[S], lexicon: &Lexicon) -> SentimentResult {
    let mut score = 0i64;
    let mut matched = 0;
    let mut i = 0;
    while i < tokens.len() {
        if i + 1 < tokens.len() {
            let bigram = format!("{} {}", tokens[i].as_ref(), tokens[i + 1].as_ref());
            if let Some(&s) = lexicon.phrases.get(&bigram) {
                score += s as i64;
                matched += 1;
                i += 2;
                continue;
            }
        }
        if let Some(&s) = lexicon.phrases.get(tokens[i].as_ref()) {
            score += s as i64;
            matched += 1;
        }
        i += 1;
    }
    SentimentResult {
        score,
        polarity: Polarity::of_score(score),
        matched,
    }
}

pub fn score_text(text: &str, lexicon: &Lexicon) -> SentimentResult {
    score_document(&tokenize(text), lexicon)
}

pub fn encode_sentiment_features(result: &SentimentResult) -> SentimentBlock {
    let magnitude = result.score.clamp(-10, 10) as f64 / 10.0;
    let flag = |p: Polarity| if result.polarity == p { 1.0 } else { 0.0 };
    [
        magnitude,
        flag(Polarity::Positive),
        flag(Polarity::Neutral),
        flag(Polarity::Negative),
    ]
}
