//! End-to-end runs: retrieve, rerank, prompt, complete, score.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Example, Manifest, Split};
use crate::error::{Error, Result};
use crate::eval::{grid_points, grid_search, macro_f1, GridOutcome, GridPoint, Method, RunResult, SweepPoint};
use crate::llm::{parse_label, Completer, CompletionRequest, PredictionRecord};
use crate::prompt::{build_prompt, DemoOrder, Prompt, PromptTemplate};
use crate::rerank::{mmr_select, SelectedContext, SelectionConfig, SimilarityKind, DEFAULT_POOL_MULTIPLIER};
use crate::retrieve::{top_k_candidates, CandidatePool};
use crate::vectorize::{load_embeddings, EmbeddingClient, TfIdfModel, VectorStore};

/// Training vectors plus query vectors for the evaluation splits, all in
/// one representation.
#[derive(Debug, Clone)]
pub struct Representations {
    pub kind: SimilarityKind,
    pub train: VectorStore,
    queries: BTreeMap<Split, VectorStore>,
}

impl Representations {
    /// Fits tf-idf on the training split only and vectorizes every split.
    pub fn lexical(dataset: &Dataset) -> Result<(Self, TfIdfModel)> {
        let texts: Vec<String> = dataset.train.iter().map(Example::text).collect();
        let model = TfIdfModel::fit(&texts)?;
        let encode = |split: Split| {
            VectorStore::sparse(
                dataset
                    .split(split)
                    .par_iter()
                    .map(|e| model.vectorize(&e.text()))
                    .collect(),
            )
        };
        let reps = Representations {
            kind: SimilarityKind::Lexical,
            train: encode(Split::Train),
            queries: [Split::Validation, Split::Test]
                .into_iter()
                .map(|s| (s, encode(s)))
                .collect(),
        };
        Ok((reps, model))
    }

    /// Reads the `embeddings.<split>` files named in the manifest.
    pub fn semantic_from_files(dataset: &Dataset, manifest: &Manifest) -> Result<Self> {
        let load = |split: Split| -> Result<VectorStore> {
            let path = manifest
                .embeddings_path(split)
                .ok_or_else(|| Error::Manifest(format!("no `embeddings.{split}` entry for semantic similarity")))?;
            load_embeddings(&path, dataset.split(split).len())
        };
        Self::semantic(load(Split::Train)?, load(Split::Validation)?, load(Split::Test)?)
    }

    /// Embeds every split through an embeddings service.
    pub fn semantic_from_client(dataset: &Dataset, client: &EmbeddingClient) -> Result<Self> {
        let embed = |split: Split| -> Result<VectorStore> {
            let texts: Vec<String> = dataset.split(split).iter().map(Example::text).collect();
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            VectorStore::dense(client.fetch_batch(&refs)?)
        };
        Self::semantic(embed(Split::Train)?, embed(Split::Validation)?, embed(Split::Test)?)
    }

    pub fn semantic(train: VectorStore, validation: VectorStore, test: VectorStore) -> Result<Self> {
        let dim = train.dim();
        for store in [&validation, &test] {
            if store.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim.unwrap_or(0),
                    found: store.dim().unwrap_or(0),
                });
            }
        }
        Ok(Representations {
            kind: SimilarityKind::Semantic,
            train,
            queries: [(Split::Validation, validation), (Split::Test, test)].into(),
        })
    }

    pub fn queries(&self, split: Split) -> &VectorStore {
        self.queries.get(&split).unwrap_or(&self.train)
    }
}

/// One method/configuration to evaluate on one split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub method: Method,
    pub k: usize,
    pub alpha: Option<f64>,
    pub n: usize,
    pub order: DemoOrder,
    pub split: Split,
}

impl RunSpec {
    pub fn new(method: Method, k: usize, alpha: Option<f64>, split: Split) -> Self {
        RunSpec {
            method,
            k,
            alpha,
            n: DEFAULT_POOL_MULTIPLIER,
            order: DemoOrder::Selection,
            split,
        }
    }

    pub fn zero_shot(split: Split) -> Self {
        Self::new(Method::ZeroShot, 0, None, split)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("{}: {msg}", self.method)));
        match self.method {
            Method::ZeroShot if self.k != 0 || self.alpha.is_some() => bad("takes no k or alpha"),
            Method::Tfidf | Method::Sbert if self.alpha.is_some() => bad("alpha only applies to MMR methods"),
            Method::TfidfMmr | Method::SbertMmr if self.alpha.is_none() => bad("alpha is required"),
            m if m != Method::ZeroShot && self.k == 0 => bad("k must be positive"),
            _ if self.n == 0 => bad("n must be positive"),
            _ => Ok(()),
        }
    }

    /// Candidate pool size: `n * k` for MMR, `k` otherwise.
    pub fn pool_size(&self) -> usize {
        if self.method.is_mmr() {
            self.n * self.k
        } else {
            self.k
        }
    }

    /// Directory name for this run's artifacts.
    pub fn run_id(&self) -> String {
        let mut id = format!("{}-{}-k{}", self.split, self.method, self.k);
        if let Some(a) = self.alpha {
            id.push_str(&format!("-a{a}-n{}", self.n));
        }
        if self.order == DemoOrder::Reversed {
            id.push_str("-rev");
        }
        id
    }
}

/// Everything produced for one query, kept for the audit trail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryTrace {
    pub query_id: usize,
    pub pool: Option<CandidatePool>,
    pub selection: Option<SelectedContext>,
    pub prompt: Prompt,
    pub record: PredictionRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub spec: RunSpec,
    pub result: RunResult,
    pub traces: Vec<QueryTrace>,
}

struct Prepared {
    query_id: usize,
    pool: Option<CandidatePool>,
    selection: Option<SelectedContext>,
    prompt: Prompt,
    nearest_label: Option<String>,
    demo_labels: Vec<String>,
}

pub struct Pipeline<'a> {
    dataset: &'a Dataset,
    template: PromptTemplate,
    lexical: Option<&'a Representations>,
    semantic: Option<&'a Representations>,
    completer: &'a dyn Completer,
}

impl<'a> Pipeline<'a> {
    pub fn new(dataset: &'a Dataset, completer: &'a dyn Completer) -> Result<Self> {
        Ok(Pipeline {
            dataset,
            template: PromptTemplate::for_dataset(dataset)?,
            lexical: None,
            semantic: None,
            completer,
        })
    }

    pub fn with_representations(mut self, reps: &'a Representations) -> Self {
        match reps.kind {
            SimilarityKind::Lexical => self.lexical = Some(reps),
            SimilarityKind::Semantic => self.semantic = Some(reps),
        }
        self
    }

    pub fn dataset(&self) -> &Dataset {
        self.dataset
    }

    fn representations(&self, kind: SimilarityKind) -> Result<&'a Representations> {
        match kind {
            SimilarityKind::Lexical => self.lexical,
            SimilarityKind::Semantic => self.semantic,
        }
        .ok_or_else(|| Error::InvalidConfig(format!("no {kind} vectors loaded")))
    }

    fn prepare(&self, spec: &RunSpec, query: &Example) -> Result<Prepared> {
        let (pool, selection, demo_ids) = match spec.method.similarity() {
            None => (None, None, Vec::new()),
            Some(kind) => {
                let reps = self.representations(kind)?;
                let qv = reps
                    .queries(spec.split)
                    .get(query.id)
                    .ok_or(Error::MissingVector(query.id))?;
                let pool = top_k_candidates(query.id, qv, &reps.train, spec.pool_size())?;
                if let Some(alpha) = spec.alpha.filter(|_| spec.method.is_mmr()) {
                    let config = SelectionConfig::new(alpha, spec.k, spec.n, kind)?;
                    let selection = mmr_select(&pool, &reps.train, &config)?;
                    let ids = selection.ids();
                    (Some(pool), Some(selection), ids)
                } else {
                    let ids = pool.ids().collect();
                    (Some(pool), None, ids)
                }
            }
        };
        let demos: Vec<&Example> = demo_ids.iter().map(|&id| &self.dataset.train[id]).collect();
        let prompt = build_prompt(&self.template, self.dataset, &demos, query, spec.order)?;
        let nearest_label = pool
            .as_ref()
            .and_then(CandidatePool::top)
            .map(|c| self.dataset.train[c.example_id].label.clone());
        let demo_labels = prompt
            .demo_ids
            .iter()
            .map(|&id| self.dataset.train[id].label.clone())
            .collect();
        Ok(Prepared {
            query_id: query.id,
            pool,
            selection,
            prompt,
            nearest_label,
            demo_labels,
        })
    }

    fn complete_all(&self, prepared: &[Prepared]) -> Result<Vec<String>> {
        let workers = self.completer.max_in_flight().clamp(1, prepared.len().max(1));
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Result<String>>>> = Mutex::new((0..prepared.len()).map(|_| None).collect());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(p) = prepared.get(i) else { break };
                    let out = self
                        .completer
                        .complete(&CompletionRequest {
                            query_id: p.query_id,
                            prompt: &p.prompt,
                            nearest_label: p.nearest_label.as_deref(),
                            demo_labels: &p.demo_labels,
                        })
                        .map_err(|e| e.for_query(p.query_id));
                    let failed = out.is_err();
                    slots.lock().expect("slots poisoned")[i] = Some(out);
                    if failed {
                        // Stop handing out work; other workers drain.
                        next.store(prepared.len(), Ordering::SeqCst);
                    }
                });
            }
        });
        slots
            .into_inner()
            .expect("slots poisoned")
            .into_iter()
            .enumerate()
            .map(|(i, slot)| {
                slot.unwrap_or_else(|| {
                    Err(Error::RetriesExhausted {
                        attempts: 0,
                        message: format!("query {} skipped after an earlier failure", prepared[i].query_id),
                    })
                })
            })
            .collect()
    }

    /// Runs `spec` over every example of `spec.split`.
    pub fn run(&self, spec: &RunSpec) -> Result<RunOutput> {
        spec.validate()?;
        let queries = self.dataset.split(spec.split);
        let prepared = queries
            .par_iter()
            .map(|q| self.prepare(spec, q).map_err(|e| e.for_query(q.id)))
            .collect::<Result<Vec<_>>>()?;
        let generations = self.complete_all(&prepared)?;

        let mut traces = Vec::with_capacity(prepared.len());
        for ((p, raw), query) in prepared.into_iter().zip(generations).zip(queries) {
            let parsed = parse_label(&raw, &self.dataset.label_set, &self.dataset.verbalizer);
            let record = PredictionRecord::new(p.query_id, raw, parsed, query.label.clone());
            traces.push(QueryTrace {
                query_id: p.query_id,
                pool: p.pool,
                selection: p.selection,
                prompt: p.prompt,
                record,
            });
        }
        let per_instance: Vec<PredictionRecord> = traces.iter().map(|t| t.record.clone()).collect();
        let f1 = macro_f1(&per_instance, &self.dataset.label_set);
        Ok(RunOutput {
            spec: *spec,
            result: RunResult {
                method: spec.method,
                split: spec.split,
                k: spec.k,
                alpha: spec.alpha,
                n: spec.method.is_mmr().then_some(spec.n),
                per_instance,
                f1,
            },
            traces,
        })
    }
}

/// Which methods and grids a sweep covers.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub methods: Vec<Method>,
    pub alphas: Vec<f64>,
    pub ks: Vec<usize>,
    pub n: usize,
    pub order: DemoOrder,
}

impl SweepPlan {
    /// Requested methods plus the baselines every report row needs: the
    /// similarity-only counterpart of each MMR method, and zero-shot.
    pub fn expanded_methods(&self) -> Vec<Method> {
        let mut all: Vec<Method> = self
            .methods
            .iter()
            .flat_map(|m| [Some(*m), m.baseline()])
            .flatten()
            .chain([Method::ZeroShot])
            .collect();
        all.sort();
        all.dedup();
        all
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// Validation grid per tuned method.
    pub grids: Vec<(Method, GridOutcome)>,
    /// Test-split runs at each method's chosen configuration.
    pub test_runs: Vec<RunOutput>,
}

impl SweepOutcome {
    pub fn sweep_points(&self) -> Vec<SweepPoint> {
        self.grids
            .iter()
            .flat_map(|(method, grid)| {
                grid.scores.iter().map(move |(p, f1)| SweepPoint {
                    method: *method,
                    k: p.k,
                    alpha: p.alpha,
                    f1: *f1,
                })
            })
            .collect()
    }
}

impl Pipeline<'_> {
    /// Grid-searches every method on the validation split, then evaluates the
    /// chosen configurations on the test split.
    pub fn sweep(&self, plan: &SweepPlan) -> Result<SweepOutcome> {
        let mut grids = Vec::new();
        let mut test_runs = Vec::new();
        for method in plan.expanded_methods() {
            let chosen = if method == Method::ZeroShot {
                GridPoint { k: 0, alpha: None }
            } else {
                let points = grid_points(method, &plan.alphas, &plan.ks);
                let outcome = grid_search(&points, |p| {
                    let spec = self.spec_for(method, p, plan, Split::Validation);
                    Ok(self.run(&spec)?.result.f1)
                })?
                .ok_or_else(|| Error::InvalidConfig(format!("empty grid for {method}")))?;
                log::info!(
                    "{method}: best k={} alpha={:?} validation F1={:.4}",
                    outcome.best.k,
                    outcome.best.alpha,
                    outcome.best_f1
                );
                let best = outcome.best;
                grids.push((method, outcome));
                best
            };
            test_runs.push(self.run(&self.spec_for(method, &chosen, plan, Split::Test))?);
        }
        Ok(SweepOutcome { grids, test_runs })
    }

    fn spec_for(&self, method: Method, point: &GridPoint, plan: &SweepPlan, split: Split) -> RunSpec {
        RunSpec {
            method,
            k: point.k,
            alpha: point.alpha,
            n: plan.n,
            order: plan.order,
            split,
        }
    }
}
