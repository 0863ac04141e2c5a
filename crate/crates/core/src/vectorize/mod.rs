//! Sparse tf-idf and dense embedding representations of example text.

mod dense;
mod embedding_client;
mod tfidf;

pub use dense::{load_embeddings, save_embeddings, DenseVector};
pub use embedding_client::{EmbeddingClient, EmbeddingEndpoint};
pub use tfidf::{SparseVector, TfIdfModel};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lowercases `text` and splits it on every character that is not
/// alphanumeric, so both whitespace and punctuation separate tokens and are
/// dropped. No stemming, no stopword removal.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorKind {
    Sparse,
    Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Vector {
    Sparse(SparseVector),
    Dense(DenseVector),
}

impl Vector {
    pub fn kind(&self) -> VectorKind {
        match self {
            Vector::Sparse(_) => VectorKind::Sparse,
            Vector::Dense(_) => VectorKind::Dense,
        }
    }

    pub fn norm(&self) -> f64 {
        match self {
            Vector::Sparse(v) => v.norm(),
            Vector::Dense(v) => v.norm(),
        }
    }
}

impl From<SparseVector> for Vector {
    fn from(v: SparseVector) -> Self {
        Vector::Sparse(v)
    }
}

impl From<DenseVector> for Vector {
    fn from(v: DenseVector) -> Self {
        Vector::Dense(v)
    }
}

/// Vectors for every example of one split, indexed by example id.
#[derive(Debug, Clone)]
pub struct VectorStore {
    kind: VectorKind,
    dim: Option<usize>,
    vectors: Vec<Vector>,
}

impl VectorStore {
    pub fn sparse(vectors: Vec<SparseVector>) -> Self {
        VectorStore {
            kind: VectorKind::Sparse,
            dim: None,
            vectors: vectors.into_iter().map(Vector::Sparse).collect(),
        }
    }

    /// Fails if the vectors do not share one dimension.
    pub fn dense(vectors: Vec<DenseVector>) -> Result<Self> {
        let dim = vectors.first().map(DenseVector::dim);
        if let Some(expected) = dim {
            if let Some(bad) = vectors.iter().find(|v| v.dim() != expected) {
                return Err(Error::DimensionMismatch {
                    expected,
                    found: bad.dim(),
                });
            }
        }
        Ok(VectorStore {
            kind: VectorKind::Dense,
            dim,
            vectors: vectors.into_iter().map(Vector::Dense).collect(),
        })
    }

    pub fn kind(&self) -> VectorKind {
        self.kind
    }

    /// Dense dimension; `None` for sparse stores.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&Vector> {
        self.vectors.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Vector)> {
        self.vectors.iter().enumerate()
    }
}
