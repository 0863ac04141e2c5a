//! Greedy Maximal Marginal Relevance selection over a candidate pool.
//!
//! At step `i` every remaining candidate `u` is scored
//!
//! ```text
//! alpha * sim(query, u) - (1 - alpha) * max_{s in selected} sim(u, s)
//! ```
//!
//! and the best one is appended to the selection. The penalty is 0 while
//! nothing is selected. Ties go to the lower example id.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::retrieve::{cosine, CandidatePool};
use crate::vectorize::VectorStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityKind {
    /// tf-idf over exact terms.
    Lexical,
    /// Cosine over dense sentence embeddings.
    Semantic,
}

impl std::str::FromStr for SimilarityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lexical" | "tfidf" => Ok(SimilarityKind::Lexical),
            "semantic" | "sbert" => Ok(SimilarityKind::Semantic),
            other => Err(Error::InvalidConfig(format!("unknown similarity {other:?}"))),
        }
    }
}

impl std::fmt::Display for SimilarityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SimilarityKind::Lexical => "lexical",
            SimilarityKind::Semantic => "semantic",
        })
    }
}

pub const DEFAULT_POOL_MULTIPLIER: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    alpha: f64,
    k: usize,
    n: usize,
    similarity: SimilarityKind,
}

impl SelectionConfig {
    pub fn new(alpha: f64, k: usize, n: usize, similarity: SimilarityKind) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidConfig(format!("alpha {alpha} outside [0, 1]")));
        }
        if k == 0 || n == 0 {
            return Err(Error::InvalidConfig("k and n must be positive".into()));
        }
        Ok(SelectionConfig {
            alpha,
            k,
            n,
            similarity,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn similarity(&self) -> SimilarityKind {
        self.similarity
    }

    /// Candidate pool size `n * k`.
    pub fn pool_size(&self) -> usize {
        self.n * self.k
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub example_id: usize,
    /// MMR score at the step the example was picked.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedContext {
    pub query_id: usize,
    pub selections: Vec<Selection>,
}

impl SelectedContext {
    pub fn ids(&self) -> Vec<usize> {
        self.selections.iter().map(|s| s.example_id).collect()
    }
}

/// Similarity between two training examples, by id.
pub trait PairwiseSimilarity {
    fn similarity(&self, a: usize, b: usize) -> f64;
}

impl<F: Fn(usize, usize) -> f64> PairwiseSimilarity for F {
    fn similarity(&self, a: usize, b: usize) -> f64 {
        self(a, b)
    }
}

impl PairwiseSimilarity for VectorStore {
    fn similarity(&self, a: usize, b: usize) -> f64 {
        match (self.get(a), self.get(b)) {
            // A store holds one kind and one dimension, so cosine cannot fail.
            (Some(u), Some(v)) => cosine(u, v).unwrap_or(0.0),
            _ => 0.0,
        }
    }
}

/// One MMR score. `max_selected_sim` is `None` while the selection is empty.
pub fn mmr_score(query_sim: f64, max_selected_sim: Option<f64>, alpha: f64) -> f64 {
    match max_selected_sim {
        None => alpha * query_sim,
        Some(penalty) => alpha * query_sim - (1.0 - alpha) * penalty,
    }
}

struct Remaining {
    example_id: usize,
    query_sim: f64,
    max_selected_sim: Option<f64>,
}

/// Greedily picks `min(k, |pool|)` candidates.
///
/// After each pick only the similarities between the new pick and the
/// remaining candidates are evaluated, so a query costs at most `K * k`
/// pairwise calls.
pub fn mmr_select<P: PairwiseSimilarity + ?Sized>(
    pool: &CandidatePool,
    pairwise: &P,
    config: &SelectionConfig,
) -> Result<SelectedContext> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    let mut remaining: Vec<Remaining> = pool
        .candidates
        .iter()
        .map(|c| Remaining {
            example_id: c.example_id,
            query_sim: c.score,
            max_selected_sim: None,
        })
        .collect();
    let steps = config.k.min(remaining.len());
    let mut selections = Vec::with_capacity(steps);

    for _ in 0..steps {
        let (best_pos, best_score) = remaining
            .iter()
            .enumerate()
            .map(|(pos, r)| (pos, mmr_score(r.query_sim, r.max_selected_sim, config.alpha)))
            .max_by(|(pa, sa), (pb, sb)| {
                sa.total_cmp(sb)
                    .then_with(|| remaining[*pb].example_id.cmp(&remaining[*pa].example_id))
            })
            .expect("remaining is non-empty while steps remain");
        let picked = remaining.swap_remove(best_pos);
        selections.push(Selection {
            example_id: picked.example_id,
            score: best_score,
        });
        for r in &mut remaining {
            let sim = pairwise.similarity(r.example_id, picked.example_id);
            r.max_selected_sim = Some(r.max_selected_sim.map_or(sim, |m| m.max(sim)));
        }
    }

    Ok(SelectedContext {
        query_id: pool.query_id,
        selections,
    })
}
