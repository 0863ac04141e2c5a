//! Metrics, significance tests, grid search and report emission.

mod grid;
mod metrics;
mod report;
mod stats;

pub use grid::{grid_points, grid_search, prefer, GridOutcome, GridPoint, ALPHA_GRID, K_GRID};
pub use metrics::{delta_percent, macro_f1};
pub use report::{build_report, emit_report, render_markdown, render_sweep_csv, EvalReport, ReportRow, SweepPoint};
pub use stats::{
    ln_gamma, paired_t_test, regularized_incomplete_beta, student_t_cdf, two_sided_p, TTest, SIGNIFICANCE_LEVEL,
};

use serde::{Deserialize, Serialize};

use crate::corpus::Split;
use crate::error::{Error, Result};
use crate::llm::PredictionRecord;
use crate::rerank::SimilarityKind;

/// The five compared selection strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ZeroShot,
    Tfidf,
    TfidfMmr,
    Sbert,
    SbertMmr,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::ZeroShot,
        Method::Tfidf,
        Method::TfidfMmr,
        Method::Sbert,
        Method::SbertMmr,
    ];

    pub fn from_parts(mmr: bool, similarity: SimilarityKind) -> Method {
        match (mmr, similarity) {
            (false, SimilarityKind::Lexical) => Method::Tfidf,
            (true, SimilarityKind::Lexical) => Method::TfidfMmr,
            (false, SimilarityKind::Semantic) => Method::Sbert,
            (true, SimilarityKind::Semantic) => Method::SbertMmr,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::ZeroShot => "zero_shot",
            Method::Tfidf => "tfidf",
            Method::TfidfMmr => "tfidf_mmr",
            Method::Sbert => "sbert",
            Method::SbertMmr => "sbert_mmr",
        }
    }

    /// Row label used in reports.
    pub fn display_name(self) -> &'static str {
        match self {
            Method::ZeroShot => "0-Shot",
            Method::Tfidf => "TFIDF",
            Method::TfidfMmr => "TFIDF-MMR",
            Method::Sbert => "SBERT",
            Method::SbertMmr => "SBERT-MMR",
        }
    }

    pub fn similarity(self) -> Option<SimilarityKind> {
        match self {
            Method::ZeroShot => None,
            Method::Tfidf | Method::TfidfMmr => Some(SimilarityKind::Lexical),
            Method::Sbert | Method::SbertMmr => Some(SimilarityKind::Semantic),
        }
    }

    pub fn is_mmr(self) -> bool {
        matches!(self, Method::TfidfMmr | Method::SbertMmr)
    }

    /// The similarity-only counterpart of an MMR method.
    pub fn baseline(self) -> Option<Method> {
        match self {
            Method::TfidfMmr => Some(Method::Tfidf),
            Method::SbertMmr => Some(Method::Sbert),
            _ => None,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        match norm.as_str() {
            "zero_shot" | "zeroshot" | "0_shot" => Ok(Method::ZeroShot),
            "tfidf" => Ok(Method::Tfidf),
            "tfidf_mmr" => Ok(Method::TfidfMmr),
            "sbert" => Ok(Method::Sbert),
            "sbert_mmr" => Ok(Method::SbertMmr),
            _ => Err(Error::InvalidConfig(format!("unknown method {s:?}"))),
        }
    }
}

/// Predictions and F1 for one method/configuration on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub method: Method,
    pub split: Split,
    /// Number of demonstrations; 0 for zero-shot.
    pub k: usize,
    pub alpha: Option<f64>,
    /// Pool multiplier for MMR runs.
    pub n: Option<usize>,
    /// Sorted by query id, one per test instance.
    pub per_instance: Vec<PredictionRecord>,
    pub f1: f64,
}

impl RunResult {
    pub fn correctness(&self) -> Vec<f64> {
        self.per_instance
            .iter()
            .map(|r| if r.correct { 1.0 } else { 0.0 })
            .collect()
    }

    pub fn query_ids(&self) -> Vec<usize> {
        self.per_instance.iter().map(|r| r.query_id).collect()
    }
}
