//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use common::oracle;
use dicl_core::corpus::load_manifest;
use dicl_core::corpus::Split;
use dicl_core::eval::{delta_percent, macro_f1, paired_t_test, GridOutcome, Method, ALPHA_GRID, K_GRID};
use dicl_core::llm::{Completer, MajorityVoteMock, NearestLabelMock, PredictionRecord};
use dicl_core::pipeline::{Pipeline, Representations, RunSpec};
use dicl_core::rerank::{mmr_select, SelectionConfig, SimilarityKind};
use dicl_core::retrieve::{rank_order, CandidatePool, ScoredCandidate};
use dicl_core::vectorize::TfIdfModel;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;
/// `(k, alpha)`
type Point = (usize, Option<f64>);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

struct Instance {
    query_sims: Vec<f64>,
    pairwise: Vec<Vec<f64>>,
}

impl Instance {
    #[allow(clippy::needless_range_loop)]
    fn random(rng: &mut StdRng, max_pool: usize) -> Self {
        let m = rng.random_range(1..=max_pool);
        let query_sims = (0..m).map(|_| rng.random::<f64>()).collect();
        let mut pairwise = vec![vec![1.0; m]; m];
        for a in 0..m {
            for b in a + 1..m {
                let s = rng.random::<f64>();
                pairwise[a][b] = s;
                pairwise[b][a] = s;
            }
        }
        Instance { query_sims, pairwise }
    }

    fn pool(&self) -> CandidatePool {
        let mut candidates: Vec<ScoredCandidate> = self
            .query_sims
            .iter()
            .enumerate()
            .map(|(example_id, &score)| ScoredCandidate { example_id, score })
            .collect();
        candidates.sort_by(rank_order);
        CandidatePool {
            query_id: 0,
            candidates,
        }
    }

    fn sim(&self) -> impl Fn(usize, usize) -> f64 + '_ {
        move |a, b| self.pairwise[a][b]
    }
}

fn mmr_oracle_equivalence() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed_0001);
    let alphas = [0.0, 0.3, 0.5, 0.8, 1.0];
    let start = Instant::now();
    let mut mismatches = 0;
    for i in 0..1000 {
        let inst = Instance::random(&mut rng, 12);
        let k = rng.random_range(1..=5);
        let alpha = alphas[i % alphas.len()];
        let cfg = SelectionConfig::new(alpha, k, 3, SimilarityKind::Lexical).map_err(|e| e.to_string())?;
        let got = mmr_select(&inst.pool(), &inst.sim(), &cfg)
            .map_err(|e| e.to_string())?
            .ids();
        let qs: Vec<(usize, f64)> = inst.query_sims.iter().copied().enumerate().collect();
        if got != oracle::mmr_greedy(&qs, &inst.sim(), alpha, k) {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    check(mismatches == 0, format!("{mismatches} mismatches"))?;
    check(elapsed < Duration::from_secs(5), format!("took {elapsed:?}"))?;
    Ok(format!("1000 instances, 0 mismatches in {:.0?}", elapsed))
}

fn full_relevance_is_top_k() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed_0002);
    for _ in 0..200 {
        let inst = Instance::random(&mut rng, 30);
        let k = rng.random_range(1..=10);
        let pool = inst.pool();
        let cfg = SelectionConfig::new(1.0, k, 3, SimilarityKind::Lexical).map_err(|e| e.to_string())?;
        let got = mmr_select(&pool, &inst.sim(), &cfg).map_err(|e| e.to_string())?.ids();
        let prefix: Vec<usize> = pool.ids().take(k).collect();
        check(got == prefix, format!("{got:?} != {prefix:?}"))?;
    }
    Ok("200 pools match the similarity prefix".into())
}

fn worked_example() -> Outcome {
    let pool = CandidatePool {
        query_id: 0,
        candidates: [(1, 0.9), (2, 0.8), (3, 0.7), (4, 0.2)]
            .into_iter()
            .map(|(example_id, score)| ScoredCandidate { example_id, score })
            .collect(),
    };
    let sim = |a: usize, b: usize| match (a.min(b), a.max(b)) {
        (1, 2) => 0.95,
        (1, 3) => 0.2,
        (1, 4) => 0.1,
        (2, 3) => 0.3,
        (2, 4) => 0.1,
        (3, 4) => 0.0,
        _ => 1.0,
    };
    let run = |alpha: f64| -> Result<Vec<usize>, String> {
        let cfg = SelectionConfig::new(alpha, 2, 3, SimilarityKind::Lexical).map_err(|e| e.to_string())?;
        Ok(mmr_select(&pool, &sim, &cfg).map_err(|e| e.to_string())?.ids())
    };
    let half = run(0.5)?;
    let full = run(1.0)?;
    check(half == vec![1, 3], format!("alpha=0.5 gave {half:?}"))?;
    check(full == vec![1, 2], format!("alpha=1 gave {full:?}"))?;
    Ok("alpha=0.5 -> [u1, u3], alpha=1 -> [u1, u2]".into())
}

/// (dataset, model, MMR F1, similarity-only F1, printed change)
const TABLE: [(&str, &str, f64, f64, f64); 24] = [
    ("RTE", "Phi2 TFIDF", 0.5649, 0.5503, 2.7),
    ("RTE", "Phi2 SBERT", 0.5464, 0.5464, 0.0),
    ("RTE", "Mistral TFIDF", 0.7484, 0.7515, -0.4),
    ("RTE", "Mistral SBERT", 0.7320, 0.7161, 2.2),
    ("RTE", "LLaMA TFIDF", 0.7173, 0.7074, 1.4),
    ("RTE", "LLaMA SBERT", 0.7133, 0.6919, 3.1),
    ("COLA", "Phi2 TFIDF", 0.3531, 0.3244, 8.8),
    ("COLA", "Phi2 SBERT", 0.3598, 0.3278, 9.7),
    ("COLA", "Mistral TFIDF", 0.7670, 0.7729, -0.8),
    ("COLA", "Mistral SBERT", 0.7851, 0.7643, 2.7),
    ("COLA", "LLaMA TFIDF", 0.6751, 0.6841, -1.3),
    ("COLA", "LLaMA SBERT", 0.6925, 0.6909, 0.2),
    ("SST2", "Phi2 TFIDF", 0.9151, 0.9151, 0.0),
    ("SST2", "Phi2 SBERT", 0.9220, 0.9255, -0.4),
    ("SST2", "Mistral TFIDF", 0.9438, 0.9426, 0.1),
    ("SST2", "Mistral SBERT", 0.9472, 0.9484, -0.1),
    ("SST2", "LLaMA TFIDF", 0.8853, 0.8842, 0.1),
    ("SST2", "LLaMA SBERT", 0.9335, 0.9220, 1.2),
    ("TREC", "Phi2 TFIDF", 0.8222, 0.8446, -2.6),
    ("TREC", "Phi2 SBERT", 0.8304, 0.8070, 2.9),
    ("TREC", "Mistral TFIDF", 0.9066, 0.8780, 3.2),
    ("TREC", "Mistral SBERT", 0.8459, 0.8418, 0.5),
    ("TREC", "LLaMA TFIDF", 0.8268, 0.7599, 8.8),
    ("TREC", "LLaMA SBERT", 0.7283, 0.7606, -4.2),
];

fn published_deltas() -> Outcome {
    let mut worst: f64 = 0.0;
    for (dataset, model, dicl, base, printed) in TABLE {
        let d = delta_percent(dicl, base).map_err(|e| e.to_string())?;
        let gap = (d - printed).abs();
        worst = worst.max(gap);
        check(gap <= 0.1 + 1e-12, format!("{dataset} {model}: {d:.4} vs {printed}"))?;
    }
    Ok(format!("24 rows, largest gap {worst:.4}"))
}

fn tfidf_oracle() -> Outcome {
    let words = ["oak", "pine", "elm", "ash", "fir", "yew", "birch", "larch"];
    let mut rng = StdRng::seed_from_u64(0x5eed_0005);
    let mut checked = 0;
    for _ in 0..50 {
        let vocab = rng.random_range(1..=words.len());
        let n_docs = rng.random_range(1..=10);
        let doc = |rng: &mut StdRng| -> Vec<String> {
            let len = rng.random_range(1..=8);
            (0..len)
                .map(|_| words[rng.random_range(0..vocab)].to_string())
                .collect()
        };
        let docs: Vec<Vec<String>> = (0..n_docs).map(|_| doc(&mut rng)).collect();
        let texts: Vec<String> = docs.iter().map(|d| d.join(" ")).collect();
        let model = TfIdfModel::fit(&texts).map_err(|e| e.to_string())?;
        let mut queries = docs.clone();
        queries.push(doc(&mut rng));
        for q in &queries {
            let v = model.vectorize(&q.join(" "));
            let expected = oracle::tfidf_weights(&docs, q);
            check(v.entries().len() == expected.len(), "support differs")?;
            for &(i, w) in v.entries() {
                let term = model.term(i).ok_or("index without term")?;
                let e = expected.get(term).ok_or(format!("unexpected term {term}"))?;
                check((w - e).abs() < 1e-9, format!("{term}: {w} vs {e}"))?;
            }
            if !v.is_empty() {
                check((v.norm() - 1.0).abs() < 1e-9, format!("norm {}", v.norm()))?;
            }
            checked += 1;
        }
    }
    Ok(format!("50 corpora, {checked} vectors within 1e-9"))
}

fn metric_oracles() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed_0006);
    for _ in 0..500 {
        let classes = rng.random_range(2..=6);
        let labels: Vec<String> = (0..classes).map(|c| format!("c{c}")).collect();
        let n = rng.random_range(1..=80);
        let gold: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let pred: Vec<Option<usize>> = (0..n)
            .map(|_| (!rng.random_bool(0.1)).then(|| rng.random_range(0..classes)))
            .collect();
        let records: Vec<PredictionRecord> = (0..n)
            .map(|i| {
                PredictionRecord::new(
                    i,
                    String::new(),
                    pred[i].map(|p| labels[p].clone()),
                    labels[gold[i]].clone(),
                )
            })
            .collect();
        let got = macro_f1(&records, &labels);
        let expected = oracle::macro_f1(&gold, &pred, classes);
        check((got - expected).abs() < 1e-12, format!("macro-F1 {got} vs {expected}"))?;
    }
    for _ in 0..200 {
        let n = rng.random_range(2..=50);
        let a: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let t = paired_t_test(&a, &b).map_err(|e| e.to_string())?.t;
        let expected = oracle::paired_t(&a, &b);
        check((t - expected).abs() < 1e-9, format!("t {t} vs {expected}"))?;
    }
    // Differences 1, 0, 1, 0 give mean 0.5, sd 1/sqrt(3), t = sqrt(3), df = 3.
    let worked = paired_t_test(&[1.0, 1.0, 1.0, 1.0], &[0.0, 1.0, 0.0, 1.0]).map_err(|e| e.to_string())?;
    check((worked.t - 3f64.sqrt()).abs() < 1e-9, format!("worked t {}", worked.t))?;
    check(worked.df == 3, format!("worked df {}", worked.df))?;
    check((worked.p - 0.182).abs() < 1e-3, format!("worked p {}", worked.p))?;
    Ok(format!(
        "500 F1 assignments, 200 t statistics, worked p={:.4}",
        worked.p
    ))
}

fn dicl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dicl"))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = dicl().args(args).output().map_err(|e| e.to_string())?;
    check(
        out.status.success(),
        format!(
            "dicl {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ),
    )
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, acc: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, acc);
            } else {
                acc.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    let mut acc = BTreeMap::new();
    walk(dir, dir, &mut acc);
    acc
}

fn jsonl(path: &Path) -> Result<Vec<serde_json::Value>, String> {
    std::fs::read_to_string(path)
        .map_err(|e| format!("{}: {e}", path.display()))?
        .lines()
        .map(|l| serde_json::from_str(l).map_err(|e| e.to_string()))
        .collect()
}

fn end_to_end_determinism() -> Outcome {
    let manifest = common::toy_manifest();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let mut trees = Vec::new();
    for name in ["first", "second"] {
        let out = tmp.path().join(name);
        run_cli(&[
            "run",
            "--dataset",
            manifest.to_str().unwrap(),
            "--method",
            "tfidf_mmr",
            "--k",
            "3",
            "--n",
            "3",
            "--alpha",
            "0.5",
            "--mock",
            "--out",
            out.to_str().unwrap(),
        ])?;
        trees.push(tree(&out));
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(10), format!("took {elapsed:?}"))?;
    check(trees[0] == trees[1], "outputs differ between runs")?;
    let files: Vec<String> = trees[0].keys().map(|p| p.display().to_string()).collect();
    for wanted in [
        "report.md",
        "pools.jsonl",
        "selections.jsonl",
        "prompts.jsonl",
        "generations.jsonl",
        "result.json",
    ] {
        check(files.iter().any(|f| f.ends_with(wanted)), format!("missing {wanted}"))?;
    }
    let run_dir = tmp.path().join("first/runs/test-tfidf_mmr-k3-a0.5-n3");
    let pools = jsonl(&run_dir.join("pools.jsonl"))?;
    let selections = jsonl(&run_dir.join("selections.jsonl"))?;
    check(
        pools.len() == 12 && selections.len() == 12,
        "expected 12 test instances",
    )?;
    for p in &pools {
        check(
            p["candidates"].as_array().map(Vec::len) == Some(9),
            "pool size is not 9",
        )?;
    }
    for s in &selections {
        check(
            s["selected"].as_array().map(Vec::len) == Some(3),
            "selection size is not 3",
        )?;
    }
    Ok(format!(
        "{} files identical, pools 9, selections 3, {:.1?}",
        files.len(),
        elapsed
    ))
}

/// Recomputes validation F1 for every grid point through the library and
/// picks the winner by an explicit scan.
fn offline_best(
    method: Method,
    completer: &dyn Completer,
    reps: &Representations,
    dataset: &dicl_core::corpus::Dataset,
) -> Result<(Vec<(Point, f64)>, Point), String> {
    let pipeline = Pipeline::new(dataset, completer)
        .map_err(|e| e.to_string())?
        .with_representations(reps);
    let mut scores = Vec::new();
    for &k in &K_GRID {
        let alphas: Vec<Option<f64>> = if method.is_mmr() {
            ALPHA_GRID.iter().map(|a| Some(*a)).collect()
        } else {
            vec![None]
        };
        for alpha in alphas {
            let spec = RunSpec::new(method, k, alpha, Split::Validation);
            let f1 = pipeline.run(&spec).map_err(|e| e.to_string())?.result.f1;
            scores.push(((k, alpha), f1));
        }
    }
    let mut best = scores[0];
    for &candidate in &scores[1..] {
        let ((k, a), f1) = candidate;
        let ((bk, ba), bf1) = best;
        let better =
            f1 > bf1 || (f1 == bf1 && k < bk) || (f1 == bf1 && k == bk && a.unwrap_or(0.0) > ba.unwrap_or(0.0));
        if better {
            best = candidate;
        }
    }
    Ok((scores, best.0))
}

fn grid_protocol() -> Outcome {
    let manifest = common::toy_manifest();
    let (dataset, _) = load_manifest(&manifest).map_err(|e| e.to_string())?;
    let (reps, _) = Representations::lexical(&dataset).map_err(|e| e.to_string())?;
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut summary = Vec::new();
    for mode in ["nearest", "vote"] {
        let out = tmp.path().join(mode);
        run_cli(&[
            "sweep",
            "--dataset",
            manifest.to_str().unwrap(),
            "--method",
            "tfidf_mmr",
            &format!("--mock={mode}"),
            "--out",
            out.to_str().unwrap(),
        ])?;
        let text = std::fs::read_to_string(out.join("grid.json")).map_err(|e| e.to_string())?;
        let record: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        let grids: Vec<(Method, GridOutcome)> =
            serde_json::from_value(record["grids"].clone()).map_err(|e| e.to_string())?;
        let csv = std::fs::read_to_string(out.join("sweep.csv")).map_err(|e| e.to_string())?;
        let count = |m: &str| csv.lines().filter(|l| l.split(',').next() == Some(m)).count();
        check(
            count("tfidf_mmr") == 60,
            format!("{mode}: {} MMR rows", count("tfidf_mmr")),
        )?;
        check(count("tfidf") == 6, format!("{mode}: {} baseline rows", count("tfidf")))?;

        let completer: Box<dyn Completer> = match mode {
            "vote" => Box::new(MajorityVoteMock::new(&dataset)),
            _ => Box::new(NearestLabelMock::new(&dataset)),
        };
        for (method, expected_points) in [(Method::TfidfMmr, 60), (Method::Tfidf, 6)] {
            let outcome = grids
                .iter()
                .find(|(m, _)| *m == method)
                .map(|(_, o)| o)
                .ok_or(format!("{mode}: no grid for {method}"))?;
            check(
                outcome.scores.len() == expected_points,
                format!("{mode} {method}: {} points", outcome.scores.len()),
            )?;
            let (scores, best) = offline_best(method, completer.as_ref(), &reps, &dataset)?;
            for ((k, alpha), f1) in &scores {
                let logged = outcome
                    .scores
                    .iter()
                    .find(|(p, _)| p.k == *k && p.alpha == *alpha)
                    .ok_or(format!("{mode} {method}: missing k={k} alpha={alpha:?}"))?;
                check(
                    logged.1 == *f1,
                    format!("{mode} {method}: F1 at k={k} alpha={alpha:?} differs"),
                )?;
            }
            check(
                (outcome.best.k, outcome.best.alpha) == best,
                format!("{mode} {method}: chose {:?}, offline {best:?}", outcome.best),
            )?;
            summary.push(format!("{mode}/{method} k={} a={:?}", best.0, best.1));
        }
    }
    Ok(format!("60 MMR + 6 baseline points; {}", summary.join(", ")))
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 8] = [
        ("mmr oracle equivalence", mmr_oracle_equivalence),
        ("alpha=1 equals similarity top-k", full_relevance_is_top_k),
        ("worked mmr example", worked_example),
        ("published relative changes", published_deltas),
        ("tf-idf oracle", tfidf_oracle),
        ("metric oracles", metric_oracles),
        ("end-to-end determinism", end_to_end_determinism),
        ("grid-search protocol", grid_protocol),
    ];
    let mut failed = 0;
    for (i, (name, criterion)) in criteria.iter().enumerate() {
        match criterion() {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
