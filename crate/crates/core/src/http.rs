//! Blocking JSON POST with bounded retries and exponential backoff.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: usize,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            initial_backoff: Duration::from_millis(250),
            max_backoff: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: usize) -> Duration {
        let factor = 1u32 << attempt.min(16);
        self.initial_backoff.saturating_mul(factor).min(self.max_backoff)
    }
}

pub(crate) struct JsonClient {
    agent: ureq::Agent,
    api_key: Option<String>,
    retry: RetryPolicy,
}

enum Attempt {
    Retryable(String),
    Fatal(Error),
}

impl JsonClient {
    pub(crate) fn new(timeout: Duration, api_key: Option<String>, retry: RetryPolicy) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        JsonClient { agent, api_key, retry }
    }

    pub(crate) fn post<B: Serialize, R: DeserializeOwned>(&self, url: &str, body: &B) -> Result<R> {
        let attempts = self.retry.max_retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(self.retry.delay(attempt - 1));
            }
            match self.try_once(url, body) {
                Ok(text) => {
                    log::debug!("POST {url} -> {text}");
                    return serde_json::from_str(&text).map_err(|e| Error::MalformedResponse(format!("{e}: {text}")));
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retryable(msg)) => {
                    log::warn!("POST {url} attempt {} of {attempts} failed: {msg}", attempt + 1);
                    last = msg;
                }
            }
        }
        Err(Error::RetriesExhausted {
            attempts,
            message: last,
        })
    }

    fn try_once<B: Serialize>(&self, url: &str, body: &B) -> std::result::Result<String, Attempt> {
        let mut request = self.agent.post(url);
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        if log::log_enabled!(log::Level::Debug) {
            if let Ok(json) = serde_json::to_string(body) {
                log::debug!("POST {url} <- {json}");
            }
        }
        let mut response = request.send_json(body).map_err(|e| Attempt::Retryable(e.to_string()))?;
        let status = response.status();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Retryable(e.to_string()))?;
        if status.is_success() {
            Ok(text)
        } else if status.is_server_error() || status.as_u16() == 429 {
            Err(Attempt::Retryable(format!("HTTP {status}")))
        } else {
            Err(Attempt::Fatal(Error::MalformedResponse(format!(
                "HTTP {status}: {text}"
            ))))
        }
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::Ordering;

    fn fast(max_retries: usize) -> RetryPolicy {
        RetryPolicy {
            max_retries,
            initial_backoff: Duration::from_millis(1),
            max_backoff: Duration::from_millis(4),
        }
    }

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy {
            max_retries: 10,
            initial_backoff: Duration::from_millis(100),
            max_backoff: Duration::from_millis(500),
        };
        assert_eq!(p.delay(0), Duration::from_millis(100));
        assert_eq!(p.delay(1), Duration::from_millis(200));
        assert_eq!(p.delay(3), Duration::from_millis(500));
    }

    #[test]
    fn retries_then_succeeds() {
        let server = test_server::spawn(|n, _| {
            if n < 2 {
                (500, "oops".into())
            } else {
                (200, r#"{"ok":1}"#.into())
            }
        });
        let client = JsonClient::new(Duration::from_secs(5), None, fast(2));
        let v: serde_json::Value = client.post(&server.url, &serde_json::json!({})).unwrap();
        assert_eq!(v["ok"], 1);
        assert_eq!(server.hits.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let server = test_server::spawn(|_, _| (400, "bad".into()));
        let client = JsonClient::new(Duration::from_secs(5), None, fast(3));
        let r: Result<serde_json::Value> = client.post(&server.url, &serde_json::json!({}));
        assert!(matches!(r, Err(Error::MalformedResponse(_))));
        assert_eq!(server.hits.load(Ordering::SeqCst), 1);
    }
}
