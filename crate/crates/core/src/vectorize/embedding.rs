use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::matrix::FeatureMatrix;
use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Externally computed document embeddings keyed by document id. Entries
/// keep file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingTable {
    dim: Option<usize>,
    entries: Vec<(String, Vec<f64>)>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingLine {
    id: String,
    vec: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let id = id.into();
        if let Some(d) = self.dim {
            if d != vector.len() {
                return Err(Error::DimMismatch {
                    expected: d,
                    actual: vector.len(),
                });
            }
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract(format!("embedding `{id}` has a non-finite value")));
        }
        if self.index.contains_key(&id) {
            return Err(Error::Contract(format!("duplicate embedding id `{id}`")));
        }
        self.dim = Some(vector.len());
        self.index.insert(id.clone(), self.entries.len());
        self.entries.push((id, vector));
        Ok(())
    }

    /// Width of the vectors; `None` for an empty table.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.index.get(id).map(|&i| self.entries[i].1.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

pub fn read_embedding_table(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut table = EmbeddingTable::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        let parsed: EmbeddingLine = serde_json::from_str(&line).map_err(|e| Error::Format {
            line: lineno,
            message: e.to_string(),
        })?;
        table
            .insert(parsed.id, parsed.vec)
            .map_err(|e| Error::Format {
                line: lineno,
                message: e.to_string(),
            })?;
    }
    Ok(table)
}

pub fn write_embedding_table(table: &EmbeddingTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for (id, vec) in &table.entries {
        serde_json::to_writer(
            &mut out,
            &EmbeddingLine {
                id: id.clone(),
                vec: vec.clone(),
            },
        )?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// One row per corpus document, in corpus order.
pub fn embed_corpus(corpus: &Corpus, table: &EmbeddingTable) -> Result<FeatureMatrix> {
    let mut rows = Vec::with_capacity(corpus.len());
    for doc in &corpus.documents {
        let v = table
            .get(&doc.id)
            .ok_or_else(|| Error::Join(doc.id.clone()))?;
        rows.push(v.to_vec());
    }
    FeatureMatrix::dense(
        corpus.ids().map(str::to_string).collect(),
        table.dim().unwrap_or(0),
        rows,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, LabelScheme, SplitTag};

    fn corpus(ids: &[&str]) -> Corpus {
        Corpus::new(
            ids.iter()
                .map(|i| Document {
                    id: i.to_string(),
                    text: String::new(),
                    label: None,
                })
                .collect(),
            LabelScheme::d1(),
            SplitTag::Unsplit,
        )
    }

    #[test]
    fn write_read_round_trip() {
        let mut t = EmbeddingTable::new();
        t.insert("a", vec![0.1, -0.2, 1e-17, 3.0]).unwrap();
        t.insert("b", vec![1.0 / 3.0, 2.0, 0.0, -7.5e10]).unwrap();
        t.insert("c", vec![0.0; 4]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.jsonl");
        write_embedding_table(&t, &p).unwrap();
        assert_eq!(read_embedding_table(&p).unwrap(), t);
    }

    #[test]
    fn inconsistent_dims_report_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.jsonl");
        std::fs::write(
            &p,
            "{\"id\":\"a\",\"vec\":[1,2,3,4]}\n{\"id\":\"b\",\"vec\":[1,2,3,4,5]}\n",
        )
        .unwrap();
        assert!(matches!(read_embedding_table(&p), Err(Error::Format { line: 2, .. })));
    }

    #[test]
    fn empty_table_then_join_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.jsonl");
        std::fs::write(&p, "").unwrap();
        let t = read_embedding_table(&p).unwrap();
        assert!(t.is_empty() && t.dim().is_none());
        assert!(matches!(embed_corpus(&corpus(&["x"]), &t), Err(Error::Join(ref id)) if id == "x"));
    }

    #[test]
    fn rows_follow_corpus_order() {
        let mut t = EmbeddingTable::new();
        t.insert("b", vec![2.0; 384]).unwrap();
        t.insert("a", vec![1.0; 384]).unwrap();
        let m = embed_corpus(&corpus(&["a", "b"]), &t).unwrap();
        assert_eq!((m.rows(), m.dim()), (2, 384));
        assert_eq!(m.row(0).get(0), 1.0);
        assert_eq!(m.ids(), ["a", "b"]);
        assert!(matches!(
            embed_corpus(&corpus(&["a", "zz", "yy"]), &t),
            Err(Error::Join(ref id)) if id == "zz"
        ));
    }
}
