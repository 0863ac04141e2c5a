//! Implementations behind the `dicl` subcommands.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::artifacts::{read_results, write_run};
use crate::config::{MockMode, RunConfig};
use crate::corpus::{load_manifest, Dataset, Manifest, Split};
use crate::error::{Error, Result};
use crate::eval::{build_report, emit_report, GridOutcome, Method, SweepPoint};
use crate::kv::KeyValues;
use crate::llm::{Completer, HttpCompleter, MajorityVoteMock, NearestLabelMock};
use crate::pipeline::{Pipeline, Representations, RunOutput, RunSpec, SweepPlan};
use crate::prompt::PromptTemplate;
use crate::rerank::SimilarityKind;
use crate::vectorize::{save_embeddings, EmbeddingClient};

fn completer(cfg: &RunConfig, dataset: &Dataset) -> Result<Box<dyn Completer>> {
    Ok(match cfg.mock {
        Some(MockMode::NearestLabel) => Box::new(NearestLabelMock::new(dataset)),
        Some(MockMode::MajorityVote) => Box::new(MajorityVoteMock::new(dataset)),
        None => Box::new(HttpCompleter::new(cfg.llm_endpoint()?)?),
    })
}

fn representations(
    cfg: &RunConfig,
    dataset: &Dataset,
    manifest: &Manifest,
    kind: SimilarityKind,
) -> Result<Representations> {
    match kind {
        SimilarityKind::Lexical => Ok(Representations::lexical(dataset)?.0),
        SimilarityKind::Semantic => match cfg.embedding_endpoint() {
            Some(endpoint) => Representations::semantic_from_client(dataset, &EmbeddingClient::new(endpoint)),
            None => Representations::semantic_from_files(dataset, manifest),
        },
    }
}

/// Config entries that describe the experiment, minus output location.
fn recorded_config(kv: &KeyValues) -> KeyValues {
    let mut out = KeyValues::new();
    for (k, v) in kv.iter() {
        if k != "out" {
            out.set(k, v);
        }
    }
    out
}

/// Validates the manifest, split files, templates and declared embeddings.
pub fn prepare(cfg: &RunConfig) -> Result<String> {
    let (dataset, manifest) = load_manifest(&cfg.dataset)?;
    PromptTemplate::for_dataset(&dataset)?;
    let mut out = String::new();
    let _ = writeln!(out, "dataset {}", dataset.name);
    let _ = writeln!(out, "labels {}", dataset.label_set.join(","));
    let _ = writeln!(out, "fields {}", dataset.field_names.join(","));
    for split in Split::ALL {
        let _ = writeln!(out, "{split} {}", dataset.split(split).len());
    }
    if manifest.embeddings_path(Split::Train).is_some() {
        let reps = Representations::semantic_from_files(&dataset, &manifest)?;
        let _ = writeln!(out, "embeddings dim {}", reps.train.dim().unwrap_or(0));
    }
    Ok(out)
}

/// Fits tf-idf (written to `<out>/tfidf.json`) and, when an embedding
/// endpoint is configured, embeds every split into `<out>/<name>.<split>.emb`.
pub fn vectorize(cfg: &RunConfig) -> Result<String> {
    let (dataset, manifest) = load_manifest(&cfg.dataset)?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let mut out = String::new();
    let (_, model) = Representations::lexical(&dataset)?;
    let path = cfg.out.join("tfidf.json");
    std::fs::write(&path, serde_json::to_string(&model)?).map_err(|e| Error::io(&path, e))?;
    let _ = writeln!(
        out,
        "tfidf vocabulary {} terms over {} documents -> {}",
        model.vocabulary_size(),
        model.n_docs(),
        path.display()
    );
    if cfg.embedding_endpoint.is_some() || manifest.embeddings_path(Split::Train).is_some() {
        let reps = representations(cfg, &dataset, &manifest, SimilarityKind::Semantic)?;
        for split in Split::ALL {
            let store = if split == Split::Train {
                &reps.train
            } else {
                reps.queries(split)
            };
            let path = cfg.out.join(format!("{}.{split}.emb", dataset.name));
            save_embeddings(store, &path)?;
            let _ = writeln!(
                out,
                "{split} embeddings dim {} -> {}",
                store.dim().unwrap_or(0),
                path.display()
            );
        }
    }
    Ok(out)
}

/// Runs one method/configuration, writes its audit trail and a one-row
/// `report.md`.
pub fn run(cfg: &RunConfig, kv: &KeyValues) -> Result<RunOutput> {
    let method = cfg.single_method()?;
    let (dataset, manifest) = load_manifest(&cfg.dataset)?;
    let spec = RunSpec {
        method,
        k: match method {
            Method::ZeroShot => 0,
            _ => cfg.k.ok_or_else(|| Error::InvalidConfig("`k` is required".into()))?,
        },
        alpha: if method.is_mmr() { cfg.alpha } else { None },
        n: cfg.n,
        order: cfg.order,
        split: cfg.split,
    };
    if !method.is_mmr() && cfg.alpha.is_some() {
        return Err(Error::InvalidConfig(format!("alpha does not apply to {method}")));
    }
    spec.validate()?;
    let completer = completer(cfg, &dataset)?;
    let reps = match method.similarity() {
        Some(kind) => Some(representations(cfg, &dataset, &manifest, kind)?),
        None => None,
    };
    let mut pipeline = Pipeline::new(&dataset, completer.as_ref())?;
    if let Some(r) = &reps {
        pipeline = pipeline.with_representations(r);
    }
    let output = pipeline.run(&spec)?;
    write_run(&cfg.out, &output, &recorded_config(kv))?;
    let report = build_report(&dataset.name, std::slice::from_ref(&output.result))?;
    emit_report(&report, &[], &cfg.out)?;
    Ok(output)
}

/// Validation grids and chosen configurations, saved as `grid.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub dataset: String,
    pub grids: Vec<(Method, GridOutcome)>,
}

/// Grid-searches on validation, evaluates the winners on test, and writes
/// `grid.json`, `report.md`, `sweep.csv` and one run directory per winner.
pub fn sweep(cfg: &RunConfig, kv: &KeyValues) -> Result<GridRecord> {
    let (dataset, manifest) = load_manifest(&cfg.dataset)?;
    let plan = SweepPlan {
        methods: if cfg.methods.is_empty() {
            vec![Method::TfidfMmr]
        } else {
            cfg.methods.clone()
        },
        alphas: cfg.alpha_grid.clone(),
        ks: cfg.k_grid.clone(),
        n: cfg.n,
        order: cfg.order,
    };
    let completer = completer(cfg, &dataset)?;
    let reps = cfg
        .needed_similarities(&plan.expanded_methods())
        .into_iter()
        .map(|kind| representations(cfg, &dataset, &manifest, kind))
        .collect::<Result<Vec<_>>>()?;
    let mut pipeline = Pipeline::new(&dataset, completer.as_ref())?;
    for r in &reps {
        pipeline = pipeline.with_representations(r);
    }
    let outcome = pipeline.sweep(&plan)?;

    let recorded = recorded_config(kv);
    for run in &outcome.test_runs {
        write_run(&cfg.out, run, &recorded)?;
    }
    let results: Vec<_> = outcome.test_runs.iter().map(|r| r.result.clone()).collect();
    let report = build_report(&dataset.name, &results)?;
    let points: Vec<SweepPoint> = outcome.sweep_points();
    emit_report(&report, &points, &cfg.out)?;
    let record = GridRecord {
        dataset: dataset.name.clone(),
        grids: outcome.grids,
    };
    let path = cfg.out.join("grid.json");
    std::fs::write(&path, serde_json::to_string_pretty(&record)?).map_err(|e| Error::io(&path, e))?;
    Ok(record)
}

/// Rebuilds `report.md` (and `sweep.csv` when `grid.json` exists) from the
/// runs stored under the output directory.
pub fn report(out_dir: &std::path::Path, split: Split) -> Result<Vec<PathBuf>> {
    let results: Vec<_> = read_results(out_dir)?
        .into_iter()
        .filter(|r| r.split == split)
        .collect();
    for m in Method::ALL {
        if results.iter().filter(|r| r.method == m).count() > 1 {
            return Err(Error::InvalidConfig(format!(
                "several {split} runs for {m} under {}; keep one per method",
                out_dir.display()
            )));
        }
    }
    let grid_path = out_dir.join("grid.json");
    let (name, points) = if grid_path.exists() {
        let text = std::fs::read_to_string(&grid_path).map_err(|e| Error::io(&grid_path, e))?;
        let record: GridRecord = serde_json::from_str(&text)?;
        let points = record
            .grids
            .iter()
            .flat_map(|(m, g)| {
                g.scores.iter().map(move |(p, f1)| SweepPoint {
                    method: *m,
                    k: p.k,
                    alpha: p.alpha,
                    f1: *f1,
                })
            })
            .collect();
        (record.dataset, points)
    } else {
        let name = out_dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        (name, Vec::new())
    };
    let report = build_report(&name, &results)?;
    emit_report(&report, &points, out_dir)
}
