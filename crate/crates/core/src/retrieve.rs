//! Exact similarity search: the K most query-similar training examples.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vectorize::{Vector, VectorStore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub example_id: usize,
    pub score: f64,
}

/// Candidates sorted by descending score, ascending id on ties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePool {
    pub query_id: usize,
    pub candidates: Vec<ScoredCandidate>,
}

impl CandidatePool {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.candidates.iter().map(|c| c.example_id)
    }

    pub fn top(&self) -> Option<&ScoredCandidate> {
        self.candidates.first()
    }
}

/// Total order used for every ranking: higher score first, then lower id.
pub fn rank_order(a: &ScoredCandidate, b: &ScoredCandidate) -> Ordering {
    b.score.total_cmp(&a.score).then(a.example_id.cmp(&b.example_id))
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(u: &Vector, v: &Vector) -> Result<f64> {
    let dot = match (u, v) {
        (Vector::Sparse(a), Vector::Sparse(b)) => a.dot(b),
        (Vector::Dense(a), Vector::Dense(b)) => {
            if a.dim() != b.dim() {
                return Err(Error::DimensionMismatch {
                    expected: a.dim(),
                    found: b.dim(),
                });
            }
            a.dot(b)
        }
        _ => return Err(Error::KindMismatch),
    };
    let denom = u.norm() * v.norm();
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / denom).clamp(-1.0, 1.0))
}

/// Returns the `k` training examples most similar to `query`. A `k` larger
/// than the store is clamped with a warning.
pub fn top_k_candidates(query_id: usize, query: &Vector, store: &VectorStore, k: usize) -> Result<CandidatePool> {
    if k == 0 {
        return Err(Error::ZeroCandidates);
    }
    if store.is_empty() {
        return Err(Error::EmptyPool);
    }
    if k > store.len() {
        log::warn!(
            "query {query_id}: K={k} exceeds {} training examples; using all",
            store.len()
        );
    }
    let mut scored = store
        .iter()
        .map(|(id, v)| cosine(query, v).map(|score| ScoredCandidate { example_id: id, score }))
        .collect::<Result<Vec<_>>>()?;
    let keep = k.min(scored.len());
    if keep < scored.len() {
        scored.select_nth_unstable_by(keep - 1, rank_order);
        scored.truncate(keep);
    }
    scored.sort_by(rank_order);
    Ok(CandidatePool {
        query_id,
        candidates: scored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vectorize::{DenseVector, SparseVector};

    fn dense(v: &[f64]) -> Vector {
        Vector::Dense(DenseVector::new(v.to_vec()).unwrap())
    }

    fn store(rows: &[&[f64]]) -> VectorStore {
        VectorStore::dense(rows.iter().map(|r| DenseVector::new(r.to_vec()).unwrap()).collect()).unwrap()
    }

    #[test]
    fn cosine_cases() {
        let u = dense(&[1.0, 2.0, 2.0]);
        assert!((cosine(&u, &u).unwrap() - 1.0).abs() < 1e-12);
        let v = dense(&[2.0, 1.0, 2.0]);
        assert!((cosine(&u, &v).unwrap() - 8.0 / 9.0).abs() < 1e-12);
        assert_eq!(cosine(&u, &v).unwrap(), cosine(&v, &u).unwrap());

        let a = Vector::Sparse(SparseVector::normalized([(0, 1.0), (2, 3.0)]));
        let b = Vector::Sparse(SparseVector::normalized([(1, 1.0), (3, 3.0)]));
        assert_eq!(cosine(&a, &b).unwrap(), 0.0);
        assert_eq!(cosine(&a, &Vector::Sparse(SparseVector::default())).unwrap(), 0.0);

        assert!(matches!(
            cosine(&u, &dense(&[1.0, 2.0])),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(cosine(&u, &a), Err(Error::KindMismatch)));
    }

    #[test]
    fn whole_split_when_k_is_large() {
        let s = store(&[&[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]]);
        let pool = top_k_candidates(7, &dense(&[1.0, 0.0]), &s, 10).unwrap();
        assert_eq!(pool.query_id, 7);
        assert_eq!(pool.ids().collect::<Vec<_>>(), vec![1, 2, 0]);
        assert!((pool.candidates[0].score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ties_break_by_id() {
        // Query similarities 0.0, 0.9, 0.1, 0.9, 0.5 by construction.
        let q = [1.0, 0.0];
        let at = |c: f64| [c, (1.0 - c * c).sqrt()];
        let rows = [at(0.0), at(0.9), at(0.1), at(0.9), at(0.5)];
        let s = store(&rows.iter().map(|r| &r[..]).collect::<Vec<_>>());
        let pool = top_k_candidates(0, &dense(&q), &s, 3).unwrap();
        assert_eq!(pool.ids().collect::<Vec<_>>(), vec![1, 3, 4]);
    }

    #[test]
    fn zero_k_is_an_error() {
        let s = store(&[&[1.0]]);
        assert!(matches!(
            top_k_candidates(0, &dense(&[1.0]), &s, 0),
            Err(Error::ZeroCandidates)
        ));
    }
}
