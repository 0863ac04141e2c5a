use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Method;
use crate::error::Result;

/// Relevance weights searched for MMR methods.
pub const ALPHA_GRID: [f64; 10] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
/// Shot counts searched for every retrieval method.
pub const K_GRID: [usize; 6] = [1, 3, 5, 7, 9, 10];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub k: usize,
    /// `None` for methods without a relevance weight.
    pub alpha: Option<f64>,
}

/// Every point to evaluate for `method`: `k` only for similarity baselines,
/// `alpha x k` for MMR, a single `k = 0` point for zero-shot.
pub fn grid_points(method: Method, alphas: &[f64], ks: &[usize]) -> Vec<GridPoint> {
    if method == Method::ZeroShot {
        return vec![GridPoint { k: 0, alpha: None }];
    }
    if !method.is_mmr() {
        return ks.iter().map(|&k| GridPoint { k, alpha: None }).collect();
    }
    alphas
        .iter()
        .flat_map(|&a| ks.iter().map(move |&k| GridPoint { k, alpha: Some(a) }))
        .collect()
}

/// `Greater` when `a` is preferred: higher F1, then smaller `k`, then larger
/// alpha.
pub fn prefer(a: (&GridPoint, f64), b: (&GridPoint, f64)) -> Ordering {
    a.1.total_cmp(&b.1)
        .then(b.0.k.cmp(&a.0.k))
        .then_with(|| match (a.0.alpha, b.0.alpha) {
            (Some(x), Some(y)) => x.total_cmp(&y),
            (Some(_), None) => Ordering::Greater,
            (None, Some(_)) => Ordering::Less,
            (None, None) => Ordering::Equal,
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub best: GridPoint,
    pub best_f1: f64,
    /// Every evaluated point with its F1, in enumeration order.
    pub scores: Vec<(GridPoint, f64)>,
}

/// Evaluates every point (in parallel) and returns the preferred one.
pub fn grid_search<F>(points: &[GridPoint], evaluate: F) -> Result<Option<GridOutcome>>
where
    F: Fn(&GridPoint) -> Result<f64> + Sync,
{
    let scores = points
        .par_iter()
        .map(|p| evaluate(p).map(|f1| (*p, f1)))
        .collect::<Result<Vec<_>>>()?;
    let best = scores.iter().max_by(|a, b| prefer((&a.0, a.1), (&b.0, b.1))).copied();
    Ok(best.map(|(best, best_f1)| GridOutcome { best, best_f1, scores }))
}
