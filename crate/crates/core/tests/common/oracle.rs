//! Independent reference computations. Nothing here calls into the crate's
//! scoring code.

use std::collections::{BTreeMap, BTreeSet};

/// Greedy MMR recomputed from scratch at every step.
pub fn mmr_greedy(
    query_sims: &[(usize, f64)],
    pairwise: &dyn Fn(usize, usize) -> f64,
    alpha: f64,
    k: usize,
) -> Vec<usize> {
    let mut selected: Vec<usize> = Vec::new();
    let steps = k.min(query_sims.len());
    for _ in 0..steps {
        let mut best: Option<(usize, f64)> = None;
        for &(u, q) in query_sims {
            if selected.contains(&u) {
                continue;
            }
            let penalty = selected
                .iter()
                .map(|&s| pairwise(u, s))
                .fold(f64::NEG_INFINITY, f64::max);
            let penalty = if selected.is_empty() { 0.0 } else { penalty };
            let score = alpha * q - (1.0 - alpha) * penalty;
            best = match best {
                None => Some((u, score)),
                Some((b, bs)) if score > bs || (score == bs && u < b) => Some((u, score)),
                keep => keep,
            };
        }
        selected.push(best.unwrap().0);
    }
    selected
}

/// Brute-force sort of (id, score) by score descending then id ascending.
pub fn ranked(mut scored: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored
}

/// Smoothed tf-idf weights for `query` over whitespace-tokenized `docs`,
/// keyed by term.
pub fn tfidf_weights(docs: &[Vec<String>], query: &[String]) -> BTreeMap<String, f64> {
    let n = docs.len() as f64;
    let vocab: BTreeSet<&String> = docs.iter().flatten().collect();
    let mut raw = BTreeMap::new();
    for term in vocab {
        let tf = query.iter().filter(|t| *t == term).count() as f64;
        if tf == 0.0 {
            continue;
        }
        let df = docs.iter().filter(|d| d.contains(term)).count() as f64;
        raw.insert(term.clone(), tf * (((1.0 + n) / (1.0 + df)).ln() + 1.0));
    }
    // Sum squares in sorted order of magnitude for a tighter norm.
    let mut squares: Vec<f64> = raw.values().map(|w| w * w).collect();
    squares.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let norm = squares.iter().sum::<f64>().sqrt();
    raw.into_iter().map(|(t, w)| (t, w / norm)).collect()
}

/// Macro-F1 from an explicit confusion matrix, via per-class precision and
/// recall. `None` predictions are INVALID.
#[allow(clippy::needless_range_loop)]
pub fn macro_f1(gold: &[usize], pred: &[Option<usize>], classes: usize) -> f64 {
    let mut matrix = vec![vec![0usize; classes + 1]; classes];
    for (g, p) in gold.iter().zip(pred) {
        matrix[*g][p.unwrap_or(classes)] += 1;
    }
    let mut f1s = Vec::new();
    for c in 0..classes {
        let tp = matrix[c][c] as f64;
        let gold_c: usize = matrix[c].iter().sum();
        let pred_c: usize = (0..classes).map(|g| matrix[g][c]).sum();
        if gold_c == 0 && pred_c == 0 {
            continue;
        }
        let precision = if pred_c == 0 { 0.0 } else { tp / pred_c as f64 };
        let recall = if gold_c == 0 { 0.0 } else { tp / gold_c as f64 };
        f1s.push(if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        });
    }
    f1s.iter().sum::<f64>() / f1s.len() as f64
}

/// `mean(d) * sqrt(n) / sd(d)` for paired differences.
pub fn paired_t(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let sd = (d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    mean * n.sqrt() / sd
}
