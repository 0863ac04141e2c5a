use crate::error::{Error, Result};
use crate::llm::PredictionRecord;

/// Unweighted mean of per-class F1 over `label_set`.
///
/// INVALID predictions count as wrong. A class that never occurs as gold or
/// prediction is skipped; any other class with no true positives scores 0.
/// Empty input yields 0.
pub fn macro_f1(records: &[PredictionRecord], label_set: &[String]) -> f64 {
    let mut tp = vec![0usize; label_set.len()];
    let mut fp = vec![0usize; label_set.len()];
    let mut fn_ = vec![0usize; label_set.len()];
    let index = |label: &str| label_set.iter().position(|l| l == label);
    for r in records {
        let gold = index(&r.gold_label);
        let pred = r.parsed_label.as_deref().and_then(index);
        match (gold, pred) {
            (Some(g), Some(p)) if g == p => tp[g] += 1,
            (g, p) => {
                if let Some(g) = g {
                    fn_[g] += 1;
                }
                if let Some(p) = p {
                    fp[p] += 1;
                }
            }
        }
    }
    let per_class: Vec<f64> = (0..label_set.len())
        .filter(|&c| tp[c] + fp[c] + fn_[c] > 0)
        .map(|c| 2.0 * tp[c] as f64 / (2 * tp[c] + fp[c] + fn_[c]) as f64)
        .collect();
    if per_class.is_empty() {
        return 0.0;
    }
    per_class.iter().sum::<f64>() / per_class.len() as f64
}

/// Relative change of `dicl_f1` over `baseline_f1`, in percent.
pub fn delta_percent(dicl_f1: f64, baseline_f1: f64) -> Result<f64> {
    if baseline_f1 == 0.0 {
        return Err(Error::ZeroBaseline);
    }
    Ok(100.0 * (dicl_f1 - baseline_f1) / baseline_f1)
}
