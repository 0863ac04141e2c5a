//! Run configuration: a flat key-value file overridden by command-line flags.

use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::corpus::Split;
use crate::error::{Error, Result};
use crate::eval::{Method, ALPHA_GRID, K_GRID};
use crate::http::RetryPolicy;
use crate::kv::KeyValues;
use crate::llm::LlmEndpoint;
use crate::prompt::DemoOrder;
use crate::rerank::{SimilarityKind, DEFAULT_POOL_MULTIPLIER};
use crate::vectorize::EmbeddingEndpoint;

pub const KNOWN_KEYS: &[&str] = &[
    "dataset",
    "method",
    "similarity",
    "alpha",
    "k",
    "n",
    "order",
    "split",
    "endpoint",
    "model",
    "mock",
    "out",
    "max_retries",
    "timeout_secs",
    "max_in_flight",
    "max_new_tokens",
    "embedding_endpoint",
    "embedding_model",
    "alpha_grid",
    "k_grid",
    "seed",
];

/// Offline completion modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockMode {
    /// Gold label of the most similar retrieved training example.
    NearestLabel,
    /// Majority label among the prompt's demonstrations.
    MajorityVote,
}

impl std::str::FromStr for MockMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" | "nearest_label" | "true" => Ok(MockMode::NearestLabel),
            "vote" | "majority_vote" => Ok(MockMode::MajorityVote),
            other => Err(Error::InvalidConfig(format!("unknown mock mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub methods: Vec<Method>,
    pub alpha: Option<f64>,
    pub k: Option<usize>,
    pub n: usize,
    pub order: DemoOrder,
    pub split: Split,
    pub endpoint: Option<String>,
    pub model: String,
    pub mock: Option<MockMode>,
    pub out: PathBuf,
    pub max_retries: usize,
    pub timeout: Duration,
    pub max_in_flight: usize,
    pub max_new_tokens: usize,
    pub embedding_endpoint: Option<String>,
    pub embedding_model: String,
    pub alpha_grid: Vec<f64>,
    pub k_grid: Vec<usize>,
    /// Reserved. Every stage is deterministic, so nothing consumes it.
    pub seed: Option<u64>,
}

fn parse_num<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("`{key}`: cannot parse {raw:?}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, raw: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

impl RunConfig {
    /// Reads `path` (if any) and applies `overrides` on top.
    pub fn load(path: Option<&Path>, overrides: &KeyValues) -> Result<(Self, KeyValues)> {
        let mut kv = match path {
            Some(p) => KeyValues::read(p)?,
            None => KeyValues::new(),
        };
        for (k, v) in overrides.iter() {
            kv.set(k, v);
        }
        let cfg = Self::from_kv(&kv)?;
        Ok((cfg, kv))
    }

    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        if let Some((key, _)) = kv.iter().find(|(k, _)| !KNOWN_KEYS.contains(k)) {
            return Err(Error::InvalidConfig(format!("unknown config key `{key}`")));
        }
        let get = |key: &str| kv.get(key).map(str::trim).filter(|v| !v.is_empty());
        let similarity: Option<SimilarityKind> = get("similarity").map(str::parse).transpose()?;
        let methods = match get("method") {
            Some(raw) => raw
                .split(',')
                .map(|m| resolve_method(m.trim(), similarity))
                .collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };
        let mock = match get("mock") {
            None | Some("false") => None,
            Some(mode) => Some(mode.parse()?),
        };
        let cfg = RunConfig {
            dataset: get("dataset")
                .map(PathBuf::from)
                .ok_or_else(|| Error::InvalidConfig("`dataset` is required".into()))?,
            methods,
            alpha: get("alpha")
                .filter(|a| *a != "none")
                .map(|a| parse_num("alpha", a))
                .transpose()?,
            k: get("k").map(|k| parse_num("k", k)).transpose()?,
            n: get("n")
                .map(|n| parse_num("n", n))
                .transpose()?
                .unwrap_or(DEFAULT_POOL_MULTIPLIER),
            order: get("order").map(str::parse).transpose()?.unwrap_or_default(),
            split: get("split").map(str::parse).transpose()?.unwrap_or(Split::Test),
            endpoint: get("endpoint").map(str::to_string),
            model: get("model").unwrap_or("default").to_string(),
            mock,
            out: PathBuf::from(get("out").unwrap_or("dicl-out")),
            max_retries: get("max_retries")
                .map(|v| parse_num("max_retries", v))
                .transpose()?
                .unwrap_or(3),
            timeout: Duration::from_secs_f64(
                get("timeout_secs")
                    .map(|v| parse_num("timeout_secs", v))
                    .transpose()?
                    .unwrap_or(60.0),
            ),
            max_in_flight: get("max_in_flight")
                .map(|v| parse_num("max_in_flight", v))
                .transpose()?
                .unwrap_or(4),
            max_new_tokens: get("max_new_tokens")
                .map(|v| parse_num("max_new_tokens", v))
                .transpose()?
                .unwrap_or(8),
            embedding_endpoint: get("embedding_endpoint").map(str::to_string),
            embedding_model: get("embedding_model").unwrap_or("default").to_string(),
            alpha_grid: get("alpha_grid")
                .map(|v| parse_list("alpha_grid", v))
                .transpose()?
                .unwrap_or(ALPHA_GRID.to_vec()),
            k_grid: get("k_grid")
                .map(|v| parse_list("k_grid", v))
                .transpose()?
                .unwrap_or(K_GRID.to_vec()),
            seed: get("seed").map(|v| parse_num("seed", v)).transpose()?,
        };
        if let Some(a) = cfg.alpha {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::InvalidConfig(format!("alpha {a} outside [0, 1]")));
            }
        }
        if cfg.n == 0 || cfg.max_new_tokens == 0 {
            return Err(Error::InvalidConfig("n and max_new_tokens must be positive".into()));
        }
        Ok(cfg)
    }

    /// The single method a `run` evaluates.
    pub fn single_method(&self) -> Result<Method> {
        match self.methods.as_slice() {
            [m] => Ok(*m),
            [] => Err(Error::InvalidConfig("`method` is required".into())),
            _ => Err(Error::InvalidConfig("`run` takes exactly one method".into())),
        }
    }

    /// Similarity kinds any configured method needs.
    pub fn needed_similarities(&self, methods: &[Method]) -> Vec<SimilarityKind> {
        let mut kinds: Vec<SimilarityKind> = methods.iter().filter_map(|m| m.similarity()).collect();
        kinds.sort_by_key(|k| *k as u8);
        kinds.dedup();
        kinds
    }

    pub fn retry(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            ..RetryPolicy::default()
        }
    }

    pub fn llm_endpoint(&self) -> Result<LlmEndpoint> {
        let url = self
            .endpoint
            .clone()
            .ok_or_else(|| Error::InvalidConfig("set `endpoint` or use `mock` for offline runs".into()))?;
        let mut e = LlmEndpoint::new(url, self.model.clone());
        e.timeout = self.timeout;
        e.retry = self.retry();
        e.max_in_flight = self.max_in_flight.max(1);
        e.max_new_tokens = self.max_new_tokens;
        Ok(e)
    }

    pub fn embedding_endpoint(&self) -> Option<EmbeddingEndpoint> {
        self.embedding_endpoint.as_ref().map(|url| {
            let mut e = EmbeddingEndpoint::new(url.clone(), self.embedding_model.clone());
            e.timeout = self.timeout;
            e.retry = self.retry();
            e.api_key = std::env::var(crate::llm::API_KEY_ENV).ok().filter(|k| !k.is_empty());
            e
        })
    }
}

/// Accepts a concrete method name, or `icl` / `mmr` combined with a
/// similarity kind. A similarity that contradicts the method is an error.
fn resolve_method(raw: &str, similarity: Option<SimilarityKind>) -> Result<Method> {
    let method = match (raw, similarity) {
        ("icl", Some(s)) => Method::from_parts(false, s),
        ("mmr", Some(s)) => Method::from_parts(true, s),
        ("icl" | "mmr", None) => return Err(Error::InvalidConfig(format!("method `{raw}` needs `similarity`"))),
        (name, _) => name.parse()?,
    };
    if let (Some(s), Some(own)) = (similarity, method.similarity()) {
        if s != own {
            return Err(Error::InvalidConfig(format!(
                "method {method} uses {own} similarity, not {s}"
            )));
        }
    }
    Ok(method)
}
