use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseRow {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseRow {
    /// Build from (index, value) pairs in any order; zeros are dropped and
    /// repeated indices summed.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut row = SparseRow::default();
        for (j, v) in pairs {
            if row.indices.last() == Some(&j) {
                *row.values.last_mut().unwrap() += v;
            } else {
                row.indices.push(j);
                row.values.push(v);
            }
        }
        let (indices, values) = row
            .indices
            .into_iter()
            .zip(row.values)
            .filter(|(_, v)| *v != 0.0)
            .unzip();
        SparseRow { indices, values }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    /// Row-major, `rows * dim` values.
    Dense(Vec<f64>),
    Sparse(Vec<SparseRow>),
}

/// Row-per-document numeric features with the ids of the documents they
/// were computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    ids: Vec<String>,
    dim: usize,
    storage: Storage,
}

/// Borrowed view of one matrix row.
#[derive(Debug, Clone, Copy)]
pub enum Row<'a> {
    Dense(&'a [f64]),
    Sparse {
        indices: &'a [u32],
        values: &'a [f64],
    },
}

impl<'a> Row<'a> {
    pub fn get(&self, j: usize) -> f64 {
        match *self {
            Row::Dense(v) => v[j],
            Row::Sparse { indices, values } => match indices.binary_search(&(j as u32)) {
                Ok(k) => values[k],
                Err(_) => 0.0,
            },
        }
    }

    /// Visit stored entries. Dense rows visit every column.
    pub fn for_each(&self, mut f: impl FnMut(usize, f64)) {
        match *self {
            Row::Dense(v) => v.iter().enumerate().for_each(|(j, &x)| f(j, x)),
            Row::Sparse { indices, values } => indices
                .iter()
                .zip(values)
                .for_each(|(&j, &x)| f(j as usize, x)),
        }
    }

    pub fn dot(&self, w: &[f64]) -> f64 {
        let mut s = 0.0;
        self.for_each(|j, x| s += x * w[j]);
        s
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        match *self {
            Row::Dense(v) => v.to_vec(),
            Row::Sparse { .. } => {
                let mut out = vec![0.0; dim];
                self.for_each(|j, x| out[j] = x);
                out
            }
        }
    }
}

fn check_ids(ids: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::Contract(format!("duplicate row id `{id}`")));
        }
    }
    Ok(())
}

fn check_finite(values: &[f64], row: usize) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Contract(format!("row {row} contains a non-finite value")))
    }
}

impl FeatureMatrix {
    pub fn dense(ids: Vec<String>, dim: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if ids.len() != rows.len() {
            return Err(Error::Contract(format!(
                "{} ids for {} rows",
                ids.len(),
                rows.len()
            )));
        }
        check_ids(&ids)?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            check_finite(&row, i)?;
            data.extend(row);
        }
        Ok(FeatureMatrix {
            ids,
            dim,
            storage: Storage::Dense(data),
        })
    }

    pub fn sparse(ids: Vec<String>, dim: usize, rows: Vec<SparseRow>) -> Result<Self> {
        if ids.len() != rows.len() {
            return Err(Error::Contract(format!(
                "{} ids for {} rows",
                ids.len(),
                rows.len()
            )));
        }
        check_ids(&ids)?;
        for (i, row) in rows.iter().enumerate() {
            if row.indices.len() != row.values.len() {
                return Err(Error::Contract(format!("row {i}: index/value length mismatch")));
            }
            if row.indices.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Contract(format!("row {i}: indices not strictly increasing")));
            }
            if row.indices.last().is_some_and(|&j| j as usize >= dim) {
                return Err(Error::Contract(format!("row {i}: index out of range for dim {dim}")));
            }
            check_finite(&row.values, i)?;
        }
        Ok(FeatureMatrix {
            ids,
            dim,
            storage: Storage::Sparse(rows),
        })
    }

    /// Dense matrix with generated ids `0..n`, for tests and fixtures.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::dense(ids, dim, rows)
    }

    pub fn rows(&self) -> usize {
        self.ids.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse(_))
    }

    pub fn row(&self, i: usize) -> Row<'_> {
        match &self.storage {
            Storage::Dense(data) => Row::Dense(&data[i * self.dim..(i + 1) * self.dim]),
            Storage::Sparse(rows) => Row::Sparse {
                indices: &rows[i].indices,
                values: &rows[i].values,
            },
        }
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = Row<'_>> {
        (0..self.rows()).map(move |i| self.row(i))
    }

    pub fn to_dense_rows(&self) -> Vec<Vec<f64>> {
        self.iter_rows().map(|r| r.to_dense(self.dim)).collect()
    }

    /// Sub-matrix of the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> FeatureMatrix {
        let ids = rows.iter().map(|&i| self.ids[i].clone()).collect();
        let storage = match &self.storage {
            Storage::Dense(data) => Storage::Dense(
                rows.iter()
                    .flat_map(|&i| data[i * self.dim..(i + 1) * self.dim].iter().copied())
                    .collect(),
            ),
            Storage::Sparse(srows) => {
                Storage::Sparse(rows.iter().map(|&i| srows[i].clone()).collect())
            }
        };
        FeatureMatrix {
            ids,
            dim: self.dim,
            storage,
        }
    }

    /// Append `extra` columns to every row; `blocks[i]` belongs to row `i`.
    pub(crate) fn append_columns(&self, extra: usize, blocks: &[Vec<f64>]) -> Result<FeatureMatrix> {
        let dim = self.dim + extra;
        match &self.storage {
            Storage::Dense(_) => {
                let rows = self
                    .iter_rows()
                    .zip(blocks)
                    .map(|(r, b)| {
                        let mut v = r.to_dense(self.dim);
                        v.extend_from_slice(b);
                        v
                    })
                    .collect();
                FeatureMatrix::dense(self.ids.clone(), dim, rows)
            }
            Storage::Sparse(srows) => {
                let rows = srows
                    .iter()
                    .zip(blocks)
                    .map(|(r, b)| {
                        let mut row = r.clone();
                        for (k, &v) in b.iter().enumerate() {
                            if v != 0.0 {
                                row.indices.push((self.dim + k) as u32);
                                row.values.push(v);
                            }
                        }
                        row
                    })
                    .collect();
                FeatureMatrix::sparse(self.ids.clone(), dim, rows)
            }
        }
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim == expected {
            Ok(())
        } else {
            Err(Error::DimMismatch {
                expected,
                actual: self.dim,
            })
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MatrixLine {
    Sparse {
        id: String,
        idx: Vec<u32>,
        val: Vec<f64>,
        dim: usize,
    },
    Dense {
        id: String,
        vec: Vec<f64>,
    },
}

pub fn write_matrix(matrix: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for (i, id) in matrix.ids.iter().enumerate() {
        let line = match &matrix.storage {
            Storage::Dense(_) => MatrixLine::Dense {
                id: id.clone(),
                vec: matrix.row(i).to_dense(matrix.dim),
            },
            Storage::Sparse(rows) => MatrixLine::Sparse {
                id: id.clone(),
                idx: rows[i].indices.clone(),
                val: rows[i].values.clone(),
                dim: matrix.dim,
            },
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Read a feature file. An empty file yields an empty dense matrix of
/// dimension 0.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut ids = Vec::new();
    let mut dense = Vec::new();
    let mut sparse = Vec::new();
    let mut dim: Option<usize> = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        let fmt = |message: String| Error::Format {
            line: lineno,
            message,
        };
        let parsed: MatrixLine = serde_json::from_str(&line).map_err(|e| fmt(e.to_string()))?;
        let (id, d) = match parsed {
            MatrixLine::Dense { id, vec } => {
                if !sparse.is_empty() {
                    return Err(fmt("dense row in sparse file".into()));
                }
                let d = vec.len();
                dense.push(vec);
                (id, d)
            }
            MatrixLine::Sparse { id, idx, val, dim } => {
                if !dense.is_empty() {
                    return Err(fmt("sparse row in dense file".into()));
                }
                sparse.push(SparseRow {
                    indices: idx,
                    values: val,
                });
                (id, dim)
            }
        };
        if *dim.get_or_insert(d) != d {
            return Err(fmt(format!("dimension {d} differs from {}", dim.unwrap())));
        }
        ids.push(id);
    }
    let dim = dim.unwrap_or(0);
    if sparse.is_empty() {
        FeatureMatrix::dense(ids, dim, dense)
    } else {
        FeatureMatrix::sparse(ids, dim, sparse)
    }
}
