//! Per-run audit trail under `<out>/runs/<run-id>/`.
//!
//! | file | content |
//! |---|---|
//! | `config.txt` | resolved configuration (key = value) |
//! | `pools.jsonl` | candidate pool per query (retrieval methods only) |
//! | `selections.jsonl` | MMR picks and step scores (MMR methods only) |
//! | `prompts.jsonl` | rendered prompt per query |
//! | `generations.jsonl` | raw generation, parsed label, correctness |
//! | `result.json` | the [`RunResult`] |

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::RunResult;
use crate::kv::KeyValues;
use crate::pipeline::RunOutput;

#[derive(Serialize)]
struct SelectionLine {
    query_id: usize,
    alpha: f64,
    k: usize,
    selected: Vec<usize>,
    scores: Vec<f64>,
}

#[derive(Serialize)]
struct PromptLine<'a> {
    query_id: usize,
    demo_ids: &'a [usize],
    text: &'a str,
}

fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut out, &row)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Writes the audit trail for `output` and returns the run directory.
pub fn write_run(out_dir: &Path, output: &RunOutput, config: &KeyValues) -> Result<PathBuf> {
    let dir = out_dir.join("runs").join(output.spec.run_id());
    if dir.exists() {
        std::fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

    let mut resolved = config.clone();
    resolved.set("method", output.spec.method.as_str());
    resolved.set("split", output.spec.split.as_str());
    resolved.set("k", output.spec.k.to_string());
    match output.spec.alpha {
        Some(a) => resolved.set("alpha", a.to_string()),
        None => resolved.set("alpha", "none"),
    }
    resolved.set("n", output.spec.n.to_string());
    resolved.set("order", format!("{:?}", output.spec.order).to_lowercase());
    let cfg = dir.join("config.txt");
    std::fs::write(&cfg, resolved.render()).map_err(|e| Error::io(&cfg, e))?;

    if output.spec.method.similarity().is_some() {
        write_jsonl(
            &dir.join("pools.jsonl"),
            output.traces.iter().filter_map(|t| t.pool.as_ref()),
        )?;
    }
    if output.spec.method.is_mmr() {
        let alpha = output.spec.alpha.unwrap_or_default();
        write_jsonl(
            &dir.join("selections.jsonl"),
            output
                .traces
                .iter()
                .filter_map(|t| t.selection.as_ref())
                .map(|s| SelectionLine {
                    query_id: s.query_id,
                    alpha,
                    k: output.spec.k,
                    selected: s.ids(),
                    scores: s.selections.iter().map(|x| x.score).collect(),
                }),
        )?;
    }
    write_jsonl(
        &dir.join("prompts.jsonl"),
        output.traces.iter().map(|t| PromptLine {
            query_id: t.query_id,
            demo_ids: &t.prompt.demo_ids,
            text: &t.prompt.text,
        }),
    )?;
    write_jsonl(&dir.join("generations.jsonl"), output.traces.iter().map(|t| &t.record))?;
    let result = dir.join("result.json");
    std::fs::write(&result, serde_json::to_string_pretty(&output.result)?).map_err(|e| Error::io(&result, e))?;
    Ok(dir)
}

/// Loads every `runs/*/result.json` under `out_dir`, sorted by run id.
pub fn read_results(out_dir: &Path) -> Result<Vec<RunResult>> {
    let runs = out_dir.join("runs");
    let entries = std::fs::read_dir(&runs).map_err(|e| Error::io(&runs, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path().join("result.json"))
        .filter(|p| p.exists())
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Ok(serde_json::from_str(&text)?)
        })
        .collect()
}
