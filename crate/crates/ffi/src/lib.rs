//! C ABI over `dicl-core`.
//!
//! Every fallible function returns a [`DiclStatus`] and writes its result
//! through an out-pointer. On failure a message is available from
//! [`dicl_last_error`] on the same thread until the next failing call.
//! Handles are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::collections::HashMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use dicl_core::corpus::{load_manifest, Dataset, Split};
use dicl_core::eval::{delta_percent, macro_f1, paired_t_test};
use dicl_core::llm::PredictionRecord;
use dicl_core::rerank::{mmr_select, SelectionConfig, SimilarityKind};
use dicl_core::retrieve::{cosine, rank_order, CandidatePool, ScoredCandidate};
use dicl_core::vectorize::{DenseVector, TfIdfModel, Vector};
use dicl_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiclStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    Io = 4,
    InvalidData = 5,
    Numeric = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// A fitted tf-idf model.
pub struct DiclTfIdf {
    model: TfIdfModel,
}

/// A loaded dataset with its three splits.
pub struct DiclDataset {
    dataset: Dataset,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DiclTTest {
    pub t: f64,
    pub df: usize,
    pub p: f64,
    pub significant: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(DiclStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } | Error::MissingFile(_) => DiclStatus::Io,
            Error::InvalidConfig(_) | Error::LengthMismatch { .. } | Error::ZeroCandidates | Error::EmptyPool => {
                DiclStatus::InvalidArgument
            }
            Error::TooFewSamples { .. } | Error::ZeroBaseline | Error::NonFinite(_) => DiclStatus::Numeric,
            _ => DiclStatus::InvalidData,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: DiclStatus, message: impl Into<String>) -> Failure {
    Failure(status, message.into())
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> DiclStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => DiclStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            DiclStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(fail(DiclStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be null or point to a NUL-terminated string.
unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    non_null(p, what)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(DiclStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

/// # Safety
/// `p` must be valid for `len` reads, or `len` must be 0.
unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message for the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dicl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dicl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Fits a tf-idf model on `n` training texts.
///
/// # Safety
/// `texts` must hold `n` NUL-terminated strings and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dicl_tfidf_fit(texts: *const *const c_char, n: usize, out: *mut *mut DiclTfIdf) -> DiclStatus {
    guard(|| {
        non_null(out, "out")?;
        let ptrs = slice(texts, n, "texts")?;
        let owned = ptrs
            .iter()
            .enumerate()
            .map(|(i, &p)| c_str(p, &format!("texts[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let model = TfIdfModel::fit(&owned)?;
        *out = Box::into_raw(Box::new(DiclTfIdf { model }));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from `dicl_tfidf_fit` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dicl_tfidf_free(model: *mut DiclTfIdf) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dicl_tfidf_vocabulary_size(model: *const DiclTfIdf, out: *mut usize) -> DiclStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        *out = (*model).model.vocabulary_size();
        Ok(())
    })
}

/// Writes the sparse vector of `text` as parallel `indices` / `weights`
/// arrays of capacity `cap`. `len` receives the number of non-zero entries;
/// when it exceeds `cap` nothing is written and `BufferTooSmall` is returned,
/// so a call with `cap = 0` queries the size.
///
/// # Safety
/// `indices` and `weights` must be valid for `cap` writes.
#[no_mangle]
pub unsafe extern "C" fn dicl_tfidf_vectorize(
    model: *const DiclTfIdf,
    text: *const c_char,
    indices: *mut usize,
    weights: *mut f64,
    cap: usize,
    len: *mut usize,
) -> DiclStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(len, "len")?;
        let v = (*model).model.vectorize(c_str(text, "text")?);
        let entries = v.entries();
        *len = entries.len();
        if entries.len() > cap {
            return Err(fail(
                DiclStatus::BufferTooSmall,
                format!("{} entries do not fit in {cap}", entries.len()),
            ));
        }
        if !entries.is_empty() {
            non_null(indices, "indices")?;
            non_null(weights, "weights")?;
            for (i, &(index, weight)) in entries.iter().enumerate() {
                *indices.add(i) = index;
                *weights.add(i) = weight;
            }
        }
        Ok(())
    })
}

/// Cosine similarity between the tf-idf vectors of two texts.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dicl_tfidf_similarity(
    model: *const DiclTfIdf,
    a: *const c_char,
    b: *const c_char,
    out: *mut f64,
) -> DiclStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        let m = &(*model).model;
        let u = Vector::from(m.vectorize(c_str(a, "a")?));
        let v = Vector::from(m.vectorize(c_str(b, "b")?));
        *out = cosine(&u, &v)?;
        Ok(())
    })
}

/// Cosine similarity of two dense vectors of length `dim`.
///
/// # Safety
/// `a` and `b` must be valid for `dim` reads.
#[no_mangle]
pub unsafe extern "C" fn dicl_cosine(a: *const f64, b: *const f64, dim: usize, out: *mut f64) -> DiclStatus {
    guard(|| {
        non_null(out, "out")?;
        let u = DenseVector::new(slice(a, dim, "a")?.to_vec())?;
        let v = DenseVector::new(slice(b, dim, "b")?.to_vec())?;
        *out = cosine(&u.into(), &v.into())?;
        Ok(())
    })
}

/// Greedy MMR over a pool of `m` candidates.
///
/// `ids[i]` and `query_sims[i]` describe candidate `i`; `pairwise` is the
/// row-major `m x m` similarity matrix in the same order. Up to
/// `min(k, m)` ids are written to `out_ids` (capacity `k`) in selection
/// order and their count to `out_len`.
///
/// # Safety
/// Array arguments must be valid for the sizes above.
#[no_mangle]
pub unsafe extern "C" fn dicl_mmr_select(
    ids: *const usize,
    query_sims: *const f64,
    pairwise: *const f64,
    m: usize,
    alpha: f64,
    k: usize,
    out_ids: *mut usize,
    out_len: *mut usize,
) -> DiclStatus {
    guard(|| {
        non_null(out_len, "out_len")?;
        let ids = slice(ids, m, "ids")?;
        let sims = slice(query_sims, m, "query_sims")?;
        let matrix = slice(pairwise, m * m, "pairwise")?;
        let position: HashMap<usize, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        if position.len() != m {
            return Err(fail(DiclStatus::InvalidArgument, "ids are not distinct"));
        }
        let config = SelectionConfig::new(alpha, k, 1, SimilarityKind::Lexical)?;
        let mut candidates: Vec<ScoredCandidate> = ids
            .iter()
            .zip(sims)
            .map(|(&example_id, &score)| ScoredCandidate { example_id, score })
            .collect();
        candidates.sort_by(rank_order);
        let pool = CandidatePool {
            query_id: 0,
            candidates,
        };
        let sim = |a: usize, b: usize| matrix[position[&a] * m + position[&b]];
        let selected = mmr_select(&pool, &sim, &config)?.ids();
        non_null(out_ids, "out_ids")?;
        for (i, id) in selected.iter().enumerate() {
            *out_ids.add(i) = *id;
        }
        *out_len = selected.len();
        Ok(())
    })
}

/// Macro-F1 over `n` predictions with labels `0..n_classes`. A negative
/// prediction marks an answer that could not be parsed.
///
/// # Safety
/// `gold` and `predicted` must be valid for `n` reads.
#[no_mangle]
pub unsafe extern "C" fn dicl_macro_f1(
    gold: *const i32,
    predicted: *const i32,
    n: usize,
    n_classes: usize,
    out: *mut f64,
) -> DiclStatus {
    guard(|| {
        non_null(out, "out")?;
        let gold = slice(gold, n, "gold")?;
        let predicted = slice(predicted, n, "predicted")?;
        let labels: Vec<String> = (0..n_classes).map(|c| c.to_string()).collect();
        let in_range = |v: i32| (v as usize) < n_classes;
        let records = gold
            .iter()
            .zip(predicted)
            .enumerate()
            .map(|(i, (&g, &p))| {
                if g < 0 || !in_range(g) || (p >= 0 && !in_range(p)) {
                    return Err(fail(DiclStatus::InvalidArgument, format!("label out of range at {i}")));
                }
                let parsed = (p >= 0).then(|| labels[p as usize].clone());
                Ok(PredictionRecord::new(
                    i,
                    String::new(),
                    parsed,
                    labels[g as usize].clone(),
                ))
            })
            .collect::<Result<Vec<_>, _>>()?;
        *out = macro_f1(&records, &labels);
        Ok(())
    })
}

/// Two-sided paired t-test of `a` against `b`.
///
/// # Safety
/// `a` and `b` must be valid for `n` reads.
#[no_mangle]
pub unsafe extern "C" fn dicl_paired_t_test(a: *const f64, b: *const f64, n: usize, out: *mut DiclTTest) -> DiclStatus {
    guard(|| {
        non_null(out, "out")?;
        let r = paired_t_test(slice(a, n, "a")?, slice(b, n, "b")?)?;
        *out = DiclTTest {
            t: r.t,
            df: r.df,
            p: r.p,
            significant: r.significant,
        };
        Ok(())
    })
}

/// Relative change of `dicl_f1` over `baseline_f1`, in percent.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dicl_delta_percent(dicl_f1: f64, baseline_f1: f64, out: *mut f64) -> DiclStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = delta_percent(dicl_f1, baseline_f1)?;
        Ok(())
    })
}

/// Loads a dataset from its manifest file.
///
/// # Safety
/// `manifest_path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dicl_dataset_load(manifest_path: *const c_char, out: *mut *mut DiclDataset) -> DiclStatus {
    guard(|| {
        non_null(out, "out")?;
        let (dataset, _) = load_manifest(Path::new(c_str(manifest_path, "manifest_path")?))?;
        *out = Box::into_raw(Box::new(DiclDataset { dataset }));
        Ok(())
    })
}

/// Releases a dataset. Null is ignored.
///
/// # Safety
/// `dataset` must come from `dicl_dataset_load` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dicl_dataset_free(dataset: *mut DiclDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Number of examples in a split: 0 train, 1 validation, 2 test.
///
/// # Safety
/// `dataset` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dicl_dataset_split_len(
    dataset: *const DiclDataset,
    split: u32,
    out: *mut usize,
) -> DiclStatus {
    guard(|| {
        non_null(dataset, "dataset")?;
        non_null(out, "out")?;
        let split = match split {
            0 => Split::Train,
            1 => Split::Validation,
            2 => Split::Test,
            other => return Err(fail(DiclStatus::InvalidArgument, format!("unknown split {other}"))),
        };
        *out = (*dataset).dataset.split(split).len();
        Ok(())
    })
}

/// Number of labels in the dataset's label set.
///
/// # Safety
/// `dataset` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dicl_dataset_label_count(dataset: *const DiclDataset, out: *mut usize) -> DiclStatus {
    guard(|| {
        non_null(dataset, "dataset")?;
        non_null(out, "out")?;
        *out = (*dataset).dataset.label_set.len();
        Ok(())
    })
}
