use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::tokenize;
use crate::error::{Error, Result};

/// L2-normalized sparse vector; entries are sorted by term index and every
/// stored weight is strictly positive.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    /// Builds a unit vector from raw non-negative weights. Zero weights are
    /// dropped; an all-zero input yields the empty vector.
    pub fn normalized(weights: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut entries: Vec<(usize, f64)> = weights.into_iter().filter(|&(_, w)| w > 0.0).collect();
        entries.sort_by_key(|&(i, _)| i);
        entries.dedup_by_key(|e| e.0);
        let norm = entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, w) in &mut entries {
                *w /= norm;
            }
        }
        SparseVector { entries }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn weight(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut a, mut b) = (self.entries.iter().peekable(), other.entries.iter().peekable());
        let mut sum = 0.0;
        while let (Some(&&(i, x)), Some(&&(j, y))) = (a.peek(), b.peek()) {
            match i.cmp(&j) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => {
                    sum += x * y;
                    a.next();
                    b.next();
                }
            }
        }
        sum
    }
}

/// Vocabulary and document frequencies fitted on the training split.
///
/// Weights are raw term count times smoothed idf,
/// `ln((1 + n_docs) / (1 + df)) + 1`, then L2-normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdfModel {
    terms: Vec<String>,
    #[serde(skip)]
    vocabulary: HashMap<String, usize>,
    df: Vec<usize>,
    n_docs: usize,
}

impl TfIdfModel {
    pub fn fit<S: AsRef<str>>(texts: &[S]) -> Result<Self> {
        let mut vocabulary: HashMap<String, usize> = HashMap::new();
        let mut terms = Vec::new();
        let mut df = Vec::new();
        for text in texts {
            let mut doc_terms: Vec<usize> = tokenize(text.as_ref())
                .into_iter()
                .map(|tok| {
                    *vocabulary.entry(tok).or_insert_with_key(|tok| {
                        terms.push(tok.clone());
                        df.push(0);
                        terms.len() - 1
                    })
                })
                .collect();
            doc_terms.sort_unstable();
            doc_terms.dedup();
            for idx in doc_terms {
                df[idx] += 1;
            }
        }
        if terms.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        Ok(TfIdfModel {
            terms,
            vocabulary,
            df,
            n_docs: texts.len(),
        })
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn vocabulary_size(&self) -> usize {
        self.terms.len()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.vocabulary.get(term).copied()
    }

    pub fn term(&self, index: usize) -> Option<&str> {
        self.terms.get(index).map(String::as_str)
    }

    pub fn df(&self, term: &str) -> Option<usize> {
        self.index_of(term).map(|i| self.df[i])
    }

    pub fn idf(&self, index: usize) -> f64 {
        ((1.0 + self.n_docs as f64) / (1.0 + self.df[index] as f64)).ln() + 1.0
    }

    /// Vectorizes `text` without touching the vocabulary; unknown terms are
    /// ignored.
    pub fn vectorize(&self, text: &str) -> SparseVector {
        let mut tf: BTreeMap<usize, usize> = BTreeMap::new();
        for tok in tokenize(text) {
            if let Some(&idx) = self.vocabulary.get(&tok) {
                *tf.entry(idx).or_default() += 1;
            }
        }
        SparseVector::normalized(tf.into_iter().map(|(idx, count)| (idx, count as f64 * self.idf(idx))))
    }

    /// Rebuilds the term lookup after deserialization.
    pub fn reindex(&mut self) {
        self.vocabulary = self.terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    }
}
