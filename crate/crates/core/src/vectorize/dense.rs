use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::{Vector, VectorStore};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector {
    values: Vec<f64>,
}

impl DenseVector {
    /// Rejects empty and non-finite input.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::DimensionMismatch { expected: 1, found: 0 });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::MalformedResponse("non-finite embedding value".into()));
        }
        Ok(DenseVector { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &DenseVector) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }
}

/// Reads `id<TAB>v1,v2,...,vd` rows into a dense store covering a split of
/// `split_len` examples.
pub fn load_embeddings(path: &Path, split_len: usize) -> Result<VectorStore> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut slots: Vec<Option<DenseVector>> = vec![None; split_len];
    let mut dim = None;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            message,
        };
        let (id, values) = line
            .split_once('\t')
            .ok_or_else(|| parse_err("expected `id<TAB>values`".into()))?;
        let id: usize = id.trim().parse().map_err(|_| parse_err(format!("bad id {id:?}")))?;
        let values = values
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| parse_err(format!("bad value {v:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(id));
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: values.len(),
                })
            }
            Some(_) => {}
        }
        let slot = slots.get_mut(id).ok_or(Error::UnknownId { id, split_len })?;
        if slot.is_some() {
            return Err(Error::DuplicateId {
                id,
                split: path.display().to_string(),
            });
        }
        *slot = Some(DenseVector::new(values)?);
    }
    let vectors = slots
        .into_iter()
        .enumerate()
        .map(|(id, v)| v.ok_or(Error::MissingVector(id)))
        .collect::<Result<Vec<_>>>()?;
    VectorStore::dense(vectors)
}

/// Writes a dense store in the format read by [`load_embeddings`].
pub fn save_embeddings(store: &VectorStore, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for (id, v) in store.iter() {
        let Vector::Dense(v) = v else {
            return Err(Error::KindMismatch);
        };
        let row: Vec<String> = v.values().iter().map(f64::to_string).collect();
        writeln!(out, "{id}\t{}", row.join(",")).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
