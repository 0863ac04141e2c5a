//! Text-completion clients and mapping generations back to labels.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::http::{JsonClient, RetryPolicy};
use crate::prompt::Prompt;
use crate::vectorize::tokenize;

pub const API_KEY_ENV: &str = "DICL_API_KEY";

/// Connection and decoding settings for a completion service. Decoding is
/// always greedy (temperature 0).
#[derive(Debug, Clone, PartialEq)]
pub struct LlmEndpoint {
    /// Requests go to `<base_url>/completions`.
    pub base_url: String,
    pub model: String,
    pub max_new_tokens: usize,
    pub timeout: Duration,
    pub retry: RetryPolicy,
    pub api_key: Option<String>,
    /// Upper bound on concurrent requests.
    pub max_in_flight: usize,
}

impl LlmEndpoint {
    pub const TEMPERATURE: f64 = 0.0;

    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        LlmEndpoint {
            base_url: base_url.into(),
            model: model.into(),
            max_new_tokens: 8,
            timeout: Duration::from_secs(60),
            retry: RetryPolicy::default(),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            max_in_flight: 4,
        }
    }
}

/// What a completer sees for one test instance.
#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub query_id: usize,
    pub prompt: &'a Prompt,
    /// Gold label of the most similar training example, when retrieval ran.
    pub nearest_label: Option<&'a str>,
    /// Gold labels of the demonstrations, in prompt order.
    pub demo_labels: &'a [String],
}

pub trait Completer: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String>;

    /// Upper bound on concurrent `complete` calls.
    fn max_in_flight(&self) -> usize {
        1
    }
}

#[derive(Serialize)]
struct CompletionBody<'a> {
    model: &'a str,
    prompt: &'a str,
    temperature: f64,
    max_tokens: usize,
}

#[derive(Deserialize)]
struct CompletionReply {
    choices: Vec<CompletionChoice>,
}

#[derive(Deserialize)]
struct CompletionChoice {
    text: String,
}

pub struct HttpCompleter {
    endpoint: LlmEndpoint,
    http: JsonClient,
}

impl HttpCompleter {
    pub fn new(endpoint: LlmEndpoint) -> Result<Self> {
        if endpoint.max_new_tokens == 0 {
            return Err(Error::InvalidConfig("max_new_tokens must be at least 1".into()));
        }
        let http = JsonClient::new(endpoint.timeout, endpoint.api_key.clone(), endpoint.retry.clone());
        Ok(HttpCompleter { endpoint, http })
    }

    /// Sends `prompt` and returns the first choice's text.
    pub fn complete_text(&self, prompt: &Prompt) -> Result<String> {
        let url = format!("{}/completions", self.endpoint.base_url.trim_end_matches('/'));
        let reply: CompletionReply = self.http.post(
            &url,
            &CompletionBody {
                model: &self.endpoint.model,
                prompt: &prompt.text,
                temperature: LlmEndpoint::TEMPERATURE,
                max_tokens: self.endpoint.max_new_tokens,
            },
        )?;
        reply
            .choices
            .into_iter()
            .next()
            .map(|c| c.text)
            .ok_or_else(|| Error::MalformedResponse("completion has no choices".into()))
    }
}

impl Completer for HttpCompleter {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String> {
        self.complete_text(request.prompt)
    }

    fn max_in_flight(&self) -> usize {
        self.endpoint.max_in_flight.max(1)
    }
}

/// Offline stand-in for a model: answers with the verbalized gold label of
/// the nearest retrieved training example, or of the majority training label
/// when nothing was retrieved.
#[derive(Debug, Clone)]
pub struct NearestLabelMock {
    label_set: Vec<String>,
    verbalizer: Vec<String>,
    fallback: String,
}

impl NearestLabelMock {
    pub fn new(dataset: &Dataset) -> Self {
        NearestLabelMock {
            label_set: dataset.label_set.clone(),
            verbalizer: dataset.verbalizer.clone(),
            fallback: dataset.majority_label().to_string(),
        }
    }

    fn verbalize(&self, label: &str) -> Option<&str> {
        self.label_set
            .iter()
            .position(|l| l == label)
            .map(|i| self.verbalizer[i].as_str())
    }
}

impl Completer for NearestLabelMock {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String> {
        let label = request.nearest_label.unwrap_or(&self.fallback);
        self.verbalize(label)
            .map(|w| format!(" {w}\n"))
            .ok_or_else(|| Error::InvalidDataset(format!("unknown label {label:?}")))
    }

    fn max_in_flight(&self) -> usize {
        4
    }
}

/// Offline stand-in that answers with the most common label among the
/// prompt's demonstrations. Ties go to the label of the earliest tied
/// demonstration; zero-shot prompts get the majority training label.
#[derive(Debug, Clone)]
pub struct MajorityVoteMock {
    inner: NearestLabelMock,
}

impl MajorityVoteMock {
    pub fn new(dataset: &Dataset) -> Self {
        MajorityVoteMock {
            inner: NearestLabelMock::new(dataset),
        }
    }
}

impl Completer for MajorityVoteMock {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String> {
        let mut best: Option<(&str, usize)> = None;
        for label in request.demo_labels {
            let count = request.demo_labels.iter().filter(|l| *l == label).count();
            if best.is_none_or(|(_, c)| count > c) {
                best = Some((label, count));
            }
        }
        let label = best.map_or(self.inner.fallback.as_str(), |(l, _)| l);
        self.inner
            .verbalize(label)
            .map(|w| format!(" {w}\n"))
            .ok_or_else(|| Error::InvalidDataset(format!("unknown label {label:?}")))
    }

    fn max_in_flight(&self) -> usize {
        4
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub query_id: usize,
    pub raw_generation: String,
    /// `None` means the generation named no label (INVALID).
    pub parsed_label: Option<String>,
    pub gold_label: String,
    pub correct: bool,
}

impl PredictionRecord {
    pub fn new(query_id: usize, raw_generation: String, parsed_label: Option<String>, gold_label: String) -> Self {
        let correct = parsed_label.as_deref() == Some(gold_label.as_str());
        PredictionRecord {
            query_id,
            raw_generation,
            parsed_label,
            gold_label,
            correct,
        }
    }
}

/// Maps a generation to the label whose verbalizer occurs earliest in it.
///
/// Matching is on lowercased tokens with punctuation removed, so "Negative."
/// matches `negative` but "negatively" does not. When two verbalizers start
/// at the same token, the one listed first in `label_set` wins.
pub fn parse_label(raw: &str, label_set: &[String], verbalizer: &[String]) -> Option<String> {
    let tokens = tokenize(raw);
    let patterns: Vec<Vec<String>> = verbalizer.iter().map(|v| tokenize(v)).collect();
    for start in 0..tokens.len() {
        for (label, pattern) in label_set.iter().zip(&patterns) {
            if !pattern.is_empty() && tokens[start..].starts_with(pattern) {
                return Some(label.clone());
            }
        }
    }
    None
}
