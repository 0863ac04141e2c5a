use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::DenseVector;
use crate::error::{Error, Result};
use crate::http::{JsonClient, RetryPolicy};

/// Where to fetch sentence embeddings from.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingEndpoint {
    /// Requests go to `<base_url>/embeddings`.
    pub base_url: String,
    pub model: String,
    pub timeout: Duration,
    pub retry: RetryPolicy,
    pub api_key: Option<String>,
    /// Expected vector dimension, if known in advance.
    pub dim: Option<usize>,
}

impl EmbeddingEndpoint {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        EmbeddingEndpoint {
            base_url: base_url.into(),
            model: model.into(),
            timeout: Duration::from_secs(30),
            retry: RetryPolicy::default(),
            api_key: None,
            dim: None,
        }
    }
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    index: usize,
    embedding: Vec<f64>,
}

/// Caching client for an HTTP embeddings service. Safe to share across
/// threads; concurrent misses for the same text may both hit the network,
/// and the cache keeps whichever identical answer lands first.
pub struct EmbeddingClient {
    endpoint: EmbeddingEndpoint,
    http: JsonClient,
    cache: Mutex<HashMap<String, DenseVector>>,
    dim: Mutex<Option<usize>>,
    requests: AtomicUsize,
}

impl EmbeddingClient {
    pub fn new(endpoint: EmbeddingEndpoint) -> Self {
        let http = JsonClient::new(endpoint.timeout, endpoint.api_key.clone(), endpoint.retry.clone());
        let dim = Mutex::new(endpoint.dim);
        EmbeddingClient {
            endpoint,
            http,
            cache: Mutex::new(HashMap::new()),
            dim,
            requests: AtomicUsize::new(0),
        }
    }

    /// Number of HTTP requests issued so far (cache hits excluded).
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn fetch(&self, text: &str) -> Result<DenseVector> {
        Ok(self.fetch_batch(&[text])?.remove(0))
    }

    /// Embeds every text, sending only cache misses over the wire.
    pub fn fetch_batch(&self, texts: &[&str]) -> Result<Vec<DenseVector>> {
        let mut misses: Vec<&str> = {
            let cache = self.cache.lock().expect("embedding cache poisoned");
            texts.iter().copied().filter(|t| !cache.contains_key(*t)).collect()
        };
        misses.sort_unstable();
        misses.dedup();
        if !misses.is_empty() {
            let fetched = self.request(&misses)?;
            let mut cache = self.cache.lock().expect("embedding cache poisoned");
            for (text, v) in misses.into_iter().zip(fetched) {
                cache.entry(text.to_string()).or_insert(v);
            }
        }
        let cache = self.cache.lock().expect("embedding cache poisoned");
        Ok(texts.iter().map(|t| cache[*t].clone()).collect())
    }

    fn request(&self, texts: &[&str]) -> Result<Vec<DenseVector>> {
        self.requests.fetch_add(1, Ordering::SeqCst);
        let url = format!("{}/embeddings", self.endpoint.base_url.trim_end_matches('/'));
        let reply: EmbeddingResponse = self.http.post(
            &url,
            &EmbeddingRequest {
                model: &self.endpoint.model,
                input: texts,
            },
        )?;
        let mut slots: Vec<Option<Vec<f64>>> = vec![None; texts.len()];
        for datum in reply.data {
            let slot = slots
                .get_mut(datum.index)
                .ok_or_else(|| Error::MalformedResponse(format!("embedding index {} out of range", datum.index)))?;
            *slot = Some(datum.embedding);
        }
        let mut dim = self.dim.lock().expect("embedding dim poisoned");
        slots
            .into_iter()
            .map(|slot| {
                let values =
                    slot.ok_or_else(|| Error::MalformedResponse("embedding response is missing an input".into()))?;
                match *dim {
                    Some(expected) if expected != values.len() => Err(Error::DimensionMismatch {
                        expected,
                        found: values.len(),
                    }),
                    _ => {
                        *dim = Some(values.len());
                        DenseVector::new(values)
                    }
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::http::test_server;

    fn endpoint(url: &str) -> EmbeddingEndpoint {
        let mut e = EmbeddingEndpoint::new(url, "mini");
        e.retry = RetryPolicy {
            max_retries: 1,
            initial_backoff: Duration::from_millis(1),
            max_backoff: Duration::from_millis(2),
        };
        e.timeout = Duration::from_secs(5);
        e
    }

    #[test]
    fn caches_identical_text() {
        let server = test_server::spawn(|_, body| {
            let req: serde_json::Value = serde_json::from_str(body).unwrap();
            assert_eq!(req["model"], "mini");
            let data: Vec<_> = req["input"]
                .as_array()
                .unwrap()
                .iter()
                .enumerate()
                .map(|(i, _)| serde_json::json!({"index": i, "embedding": [0.1, 0.2, 0.3]}))
                .collect();
            (200, serde_json::json!({ "data": data }).to_string())
        });
        let client = EmbeddingClient::new(endpoint(&server.url));
        let a = client.fetch("hello").unwrap();
        let b = client.fetch("hello").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values(), &[0.1, 0.2, 0.3]);
        assert_eq!(client.request_count(), 1);
    }

    #[test]
    fn endpoint_down_errors_after_retries() {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        drop(listener);
        let client = EmbeddingClient::new(endpoint(&url));
        assert!(matches!(
            client.fetch("x"),
            Err(Error::RetriesExhausted { attempts: 2, .. })
        ));
    }

    #[test]
    fn dimension_mismatch() {
        let server = test_server::spawn(|_, _| (200, r#"{"data":[{"index":0,"embedding":[1,2,3,4,5]}]}"#.into()));
        let mut e = endpoint(&server.url);
        e.dim = Some(384);
        let client = EmbeddingClient::new(e);
        assert!(matches!(
            client.fetch("x"),
            Err(Error::DimensionMismatch {
                expected: 384,
                found: 5
            })
        ));
    }
}
