//! Labeled document collections: delimited-file ingest, deduplication,
//! label schemes and stratified splitting.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub label: Option<usize>,
}

/// Ordered class names of a dataset. Matching is trim + case-insensitive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelScheme {
    names: Vec<String>,
}

fn fold_label(s: &str) -> String {
    s.trim().to_lowercase()
}

impl LabelScheme {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Contract("label scheme has no classes".into()));
        }
        let names: Vec<String> = names.iter().map(|n| fold_label(n.as_ref())).collect();
        let mut seen = HashSet::new();
        for n in &names {
            if n.is_empty() {
                return Err(Error::Contract("empty class name".into()));
            }
            if !seen.insert(n.as_str()) {
                return Err(Error::Contract(format!("duplicate class name `{n}`")));
            }
        }
        Ok(LabelScheme { names })
    }

    /// Three-level scheme of the LT-EDI 2022 Reddit data (labels as spelled
    /// in the published files).
    pub fn d1() -> Self {
        Self::new(&["not depression", "moderate", "severe"]).unwrap()
    }

    pub fn d2() -> Self {
        Self::new(&["minimal", "mild", "moderate", "severe"]).unwrap()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn count(&self) -> usize {
        self.names.len()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        let folded = fold_label(label);
        self.names.iter().position(|n| *n == folded)
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.names.get(index).map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Dev,
    Test,
    Unsplit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub scheme: LabelScheme,
    pub split: SplitTag,
}

/// Header names of the id, text and (optional) label columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub id: String,
    pub text: String,
    pub label: Option<String>,
}

impl ColumnMapping {
    pub fn new(id: &str, text: &str, label: Option<&str>) -> Self {
        ColumnMapping {
            id: id.to_string(),
            text: text.to_string(),
            label: label.map(str::to_string),
        }
    }
}

fn find_column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .or_else(|| {
            headers
                .iter()
                .position(|h| h.trim().eq_ignore_ascii_case(name))
        })
        .ok_or_else(|| Error::Schema(name.to_string()))
}

/// Load a header-bearing delimited file. Row numbers in errors are 1-based
/// data rows (the header is row 0).
pub fn load_table(
    path: impl AsRef<Path>,
    mapping: &ColumnMapping,
    scheme: &LabelScheme,
    delimiter: u8,
) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_table(file, mapping, scheme, delimiter)
}

pub fn read_table<R: std::io::Read>(
    reader: R,
    mapping: &ColumnMapping,
    scheme: &LabelScheme,
    delimiter: u8,
) -> Result<Corpus> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    let id_col = find_column(&headers, &mapping.id)?;
    let text_col = find_column(&headers, &mapping.text)?;
    let label_col = match &mapping.label {
        Some(name) => Some(find_column(&headers, name)?),
        None => None,
    };

    let mut documents = Vec::new();
    let mut ids = HashSet::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let id = record[id_col].trim().to_string();
        if id.is_empty() {
            return Err(Error::Parse {
                row,
                message: "empty id".into(),
            });
        }
        if !ids.insert(id.clone()) {
            return Err(Error::Parse {
                row,
                message: format!("duplicate id `{id}`"),
            });
        }
        let label = match label_col {
            Some(col) => {
                let raw = &record[col];
                Some(scheme.index_of(raw).ok_or_else(|| Error::Label {
                    row,
                    value: raw.to_string(),
                })?)
            }
            None => None,
        };
        documents.push(Document {
            id,
            text: record[text_col].to_string(),
            label,
        });
    }
    Ok(Corpus {
        documents,
        scheme: scheme.clone(),
        split: SplitTag::Unsplit,
    })
}

/// Text key used for duplicate detection: NFC, whitespace runs collapsed to
/// one space, ends trimmed, case preserved.
pub fn normalized_text(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    nfc.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl Corpus {
    pub fn new(documents: Vec<Document>, scheme: LabelScheme, split: SplitTag) -> Self {
        Corpus {
            documents,
            scheme,
            split,
        }
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.documents.iter().map(|d| d.id.as_str())
    }

    /// Gold labels; fails on the first unlabeled document.
    pub fn labels(&self) -> Result<Vec<usize>> {
        self.documents
            .iter()
            .map(|d| {
                d.label
                    .ok_or_else(|| Error::Contract(format!("document `{}` has no label", d.id)))
            })
            .collect()
    }

    pub fn deduplicate(&self) -> Corpus {
        deduplicate(self)
    }

    pub fn class_counts(&self) -> Result<Vec<usize>> {
        class_counts(self)
    }

    pub fn with_split(mut self, split: SplitTag) -> Self {
        self.split = split;
        self
    }
}

/// Keep the first occurrence of every normalized text.
pub fn deduplicate(corpus: &Corpus) -> Corpus {
    let mut seen = HashSet::new();
    let documents = corpus
        .documents
        .iter()
        .filter(|d| seen.insert(normalized_text(&d.text)))
        .cloned()
        .collect();
    Corpus {
        documents,
        scheme: corpus.scheme.clone(),
        split: corpus.split,
    }
}

pub fn class_counts(corpus: &Corpus) -> Result<Vec<usize>> {
    let mut counts = vec![0; corpus.scheme.count()];
    for label in corpus.labels()? {
        counts[label] += 1;
    }
    Ok(counts)
}

/// Per-class training share: `round(fraction * n)` clamped to `[1, n - 1]`.
pub fn train_share(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).round() as usize).clamp(1, n - 1)
}

/// Stratified two-way split. The first part receives `fraction` of every
/// class (see [`train_share`]); both parts keep corpus order.
pub fn stratified_split(corpus: &Corpus, fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Split(format!("fraction {fraction} outside (0, 1)")));
    }
    let labels = corpus.labels()?;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); corpus.scheme.count()];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut in_first = vec![false; labels.len()];
    for (class, members) in by_class.iter_mut().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(Error::Split(format!(
                "class `{}` has {} document(s); at least 2 required",
                corpus.scheme.name(class).unwrap_or("?"),
                members.len()
            )));
        }
        let take = train_share(members.len(), fraction);
        let mut rng = rng::stream(seed, &[rng::tag("stratified_split"), class as u64]);
        members.shuffle(&mut rng);
        for &i in &members[..take] {
            in_first[i] = true;
        }
    }
    let (mut first, mut second) = (Vec::new(), Vec::new());
    for (doc, &flag) in corpus.documents.iter().zip(&in_first) {
        if flag {
            first.push(doc.clone());
        } else {
            second.push(doc.clone());
        }
    }
    Ok((
        Corpus::new(first, corpus.scheme.clone(), SplitTag::Train),
        Corpus::new(second, corpus.scheme.clone(), SplitTag::Test),
    ))
}

#[derive(Serialize, Deserialize)]
struct JsonDocument {
    id: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

pub fn write_jsonl(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for doc in &corpus.documents {
        let line = JsonDocument {
            id: doc.id.clone(),
            text: doc.text.clone(),
            label: doc
                .label
                .and_then(|l| corpus.scheme.name(l))
                .map(str::to_string),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl(path: impl AsRef<Path>, scheme: &LabelScheme, split: SplitTag) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut documents = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = i + 1;
        let doc: JsonDocument = serde_json::from_str(&line).map_err(|e| Error::Format {
            line: row,
            message: e.to_string(),
        })?;
        if doc.id.is_empty() || !ids.insert(doc.id.clone()) {
            return Err(Error::Format {
                line: row,
                message: format!("empty or duplicate id `{}`", doc.id),
            });
        }
        let label = match doc.label {
            Some(name) => Some(scheme.index_of(&name).ok_or(Error::Label {
                row,
                value: name,
            })?),
            None => None,
        };
        documents.push(Document {
            id: doc.id,
            text: doc.text,
            label,
        });
    }
    Ok(Corpus::new(documents, scheme.clone(), split))
}

/// Map from document id to gold label, for joining labels onto feature rows.
pub fn label_index(corpus: &Corpus) -> HashMap<&str, Option<usize>> {
    corpus
        .documents
        .iter()
        .map(|d| (d.id.as_str(), d.label))
        .collect()
}
