use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{delta_percent, paired_t_test, Method, RunResult, TTest};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: Method,
    pub k: usize,
    pub alpha: Option<f64>,
    pub f1: f64,
    /// Change over the similarity-only counterpart; MMR rows only.
    pub delta_percent: Option<f64>,
    pub vs_zero_shot: Option<TTest>,
    /// Against the similarity-only counterpart; MMR rows only.
    pub vs_baseline: Option<TTest>,
}

impl ReportRow {
    /// Significant improvement over zero-shot.
    pub fn mark_a(&self) -> bool {
        self.vs_zero_shot.is_some_and(|t| t.favours_first())
    }

    /// Significant improvement over standard ICL.
    pub fn mark_b(&self) -> bool {
        self.vs_baseline.is_some_and(|t| t.favours_first())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub rows: Vec<ReportRow>,
}

/// One evaluated grid point, for F1-versus-k curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub method: Method,
    pub k: usize,
    pub alpha: Option<f64>,
    pub f1: f64,
}

fn paired(a: &RunResult, b: &RunResult) -> Result<TTest> {
    if a.query_ids() != b.query_ids() {
        return Err(Error::InvalidDataset(format!(
            "{} and {} were evaluated on different instances",
            a.method, b.method
        )));
    }
    paired_t_test(&a.correctness(), &b.correctness())
}

/// Compares every run against zero-shot and MMR runs against their
/// similarity-only counterpart. At most one run per method is expected.
pub fn build_report(dataset: &str, results: &[RunResult]) -> Result<EvalReport> {
    let find = |m: Method| results.iter().find(|r| r.method == m);
    let zero_shot = find(Method::ZeroShot);
    let mut rows = Vec::new();
    for method in Method::ALL {
        let Some(run) = find(method) else { continue };
        let vs_zero_shot = match zero_shot {
            Some(z) if method != Method::ZeroShot => Some(paired(run, z)?),
            _ => None,
        };
        let baseline = method.baseline().and_then(find);
        let (delta, vs_baseline) = match baseline {
            Some(b) => (delta_percent(run.f1, b.f1).ok(), Some(paired(run, b)?)),
            None => (None, None),
        };
        rows.push(ReportRow {
            method,
            k: run.k,
            alpha: run.alpha,
            f1: run.f1,
            delta_percent: delta,
            vs_zero_shot,
            vs_baseline,
        });
    }
    if rows.is_empty() {
        return Err(Error::InvalidConfig("no results to report".into()));
    }
    Ok(EvalReport {
        dataset: dataset.to_string(),
        rows,
    })
}

fn format_delta(delta: Option<f64>) -> String {
    match delta {
        None => "N/A".into(),
        Some(d) => {
            let mag = format!("{:.1}", d.abs());
            if mag == "0.0" {
                mag
            } else if d > 0.0 {
                format!("↑ {mag}")
            } else {
                format!("↓ {mag}")
            }
        }
    }
}

fn format_alpha(alpha: Option<f64>) -> String {
    alpha.map_or_else(|| "N/A".into(), |a| format!("{a:.1}"))
}

fn format_test(t: Option<TTest>) -> String {
    match t {
        None => "–".into(),
        Some(t) => format!("t={:.3}, p={:.4}", t.t, t.p),
    }
}

pub fn render_markdown(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {}\n", report.dataset);
    out.push_str("| Method | K | α | F1 | Δ(%) |\n|---|---|---|---|---|\n");
    for row in &report.rows {
        let marks: Vec<&str> = [(row.mark_a(), "a"), (row.mark_b(), "b")]
            .into_iter()
            .filter_map(|(on, m)| on.then_some(m))
            .collect();
        let sup = if marks.is_empty() {
            String::new()
        } else {
            format!("<sup>{}</sup>", marks.join(","))
        };
        let _ = writeln!(
            out,
            "| {} | {} | {} | {:.4}{} | {} |",
            row.method.display_name(),
            row.k,
            format_alpha(row.alpha),
            row.f1,
            sup,
            format_delta(row.delta_percent),
        );
    }
    out.push_str(
        "\nΔ(%): change over the similarity-only counterpart. \
         Superscripts a / b: significant improvement (two-sided paired t-test, p < 0.05) \
         over 0-Shot / the similarity-only counterpart.\n",
    );
    out.push_str("\n## Paired t-tests\n\n| Method | vs 0-Shot | vs counterpart |\n|---|---|---|\n");
    for row in &report.rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} |",
            row.method.display_name(),
            format_test(row.vs_zero_shot),
            format_test(row.vs_baseline),
        );
    }
    out
}

/// `method,k,alpha,f1` rows sorted by method, k, then alpha.
pub fn render_sweep_csv(points: &[SweepPoint]) -> String {
    let mut sorted: Vec<&SweepPoint> = points.iter().collect();
    sorted.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.k.cmp(&b.k))
            .then(a.alpha.unwrap_or(-1.0).total_cmp(&b.alpha.unwrap_or(-1.0)))
    });
    let mut out = String::from("method,k,alpha,f1\n");
    for p in sorted {
        let alpha = p.alpha.map(|a| format!("{a:.1}")).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{:.6}", p.method, p.k, alpha, p.f1);
    }
    out
}

/// Writes `report.md` and, when `sweep` is non-empty, `sweep.csv` into `dir`.
pub fn emit_report(report: &EvalReport, sweep: &[SweepPoint], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let md = dir.join("report.md");
    std::fs::write(&md, render_markdown(report)).map_err(|e| Error::io(&md, e))?;
    written.push(md);
    if !sweep.is_empty() {
        let csv = dir.join("sweep.csv");
        std::fs::write(&csv, render_sweep_csv(sweep)).map_err(|e| Error::io(&csv, e))?;
        written.push(csv);
    }
    Ok(written)
}
