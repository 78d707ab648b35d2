//! Batching HTTP client for the inference service.
//!
//! Wire protocol:
//!
//! * `POST /v1/ate` `{"items":[{"id","text"}]}` -> `{"results":[{"id","terms":[..]}]}`
//! * `POST /v1/asc` `{"items":[{"id","text","term"}]}` ->
//!   `{"results":[{"id","term","polarity","scores":{"positive","negative","neutral"}}]}`
//! * `GET /v1/health` -> model identifiers, decoding settings, service version
//!
//! Items are chunked to `max_batch`, at most `max_in_flight` requests run at
//! once, and results come back in input order. Timeouts, connection failures
//! and 5xx responses are retried with exponential backoff; any other failure
//! is a protocol error.

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{AscBackend, AscPrediction, AteBackend, BackendError, Scores};
use crate::corpus::Polarity;
use crate::pipeline::parallel_map;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteEndpointConfig {
    pub base_url: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub backoff_ms: u64,
    pub max_batch: usize,
    pub max_in_flight: usize,
}

impl Default for RemoteEndpointConfig {
    fn default() -> Self {
        RemoteEndpointConfig {
            base_url: "http://127.0.0.1:8000".into(),
            timeout_ms: 120_000,
            max_retries: 3,
            backoff_ms: 250,
            max_batch: 16,
            max_in_flight: 4,
        }
    }
}

impl RemoteEndpointConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        RemoteEndpointConfig { base_url: base_url.into(), ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.base_url.trim().is_empty() {
            return Err(BackendError::Config("endpoint URL is empty".into()));
        }
        if self.timeout_ms == 0 || self.backoff_ms == 0 || self.max_batch == 0 || self.max_in_flight == 0 {
            return Err(BackendError::Config(
                "timeout, backoff, batch size and in-flight limit must all be positive".into(),
            ));
        }
        Ok(())
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base_url.trim_end_matches('/'))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AteItem {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AteResult {
    pub id: String,
    pub terms: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AscItem {
    pub id: String,
    pub text: String,
    pub term: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AscResult {
    pub id: String,
    pub term: String,
    pub polarity: Polarity,
    pub scores: Scores,
}

#[derive(Serialize)]
struct WireRequest<'a, T> {
    items: &'a [T],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireResponse<T> {
    results: Vec<T>,
}

/// Counting semaphore capping concurrent wire requests.
#[derive(Debug)]
struct Gate {
    free: Mutex<usize>,
    released: Condvar,
}

impl Gate {
    fn new(permits: usize) -> Self {
        Gate { free: Mutex::new(permits), released: Condvar::new() }
    }

    fn hold<R>(&self, f: impl FnOnce() -> R) -> R {
        {
            let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
            while *free == 0 {
                free = self.released.wait(free).unwrap_or_else(|e| e.into_inner());
            }
            *free -= 1;
        }
        let result = f();
        *self.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.released.notify_one();
        result
    }
}

/// Client for one inference endpoint; safe to share across threads.
#[derive(Debug)]
pub struct RemoteBackend {
    cfg: RemoteEndpointConfig,
    agent: ureq::Agent,
    gate: Gate,
}

enum Attempt {
    Retry(String),
    Fatal(BackendError),
}

fn excerpt(body: &str) -> String {
    body.chars().take(200).collect()
}

impl RemoteBackend {
    pub fn new(cfg: RemoteEndpointConfig) -> Result<Self, BackendError> {
        cfg.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(cfg.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        let gate = Gate::new(cfg.max_in_flight);
        Ok(RemoteBackend { cfg, agent, gate })
    }

    pub fn config(&self) -> &RemoteEndpointConfig {
        &self.cfg
    }

    fn attempt(&self, path: &str, body: Option<&serde_json::Value>) -> Result<String, Attempt> {
        let url = self.cfg.url(path);
        let response = match body {
            Some(body) => self.agent.post(&url).send_json(body),
            None => self.agent.get(&url).call(),
        };
        let response = match response {
            Ok(r) => r,
            Err(
                e @ (ureq::Error::Timeout(_)
                | ureq::Error::Io(_)
                | ureq::Error::ConnectionFailed
                | ureq::Error::HostNotFound
                | ureq::Error::BodyStalled
                | ureq::Error::Protocol(_)),
            ) => return Err(Attempt::Retry(e.to_string())),
            Err(e) => {
                return Err(Attempt::Fatal(BackendError::Unavailable {
                    backend: self.id_string(),
                    detail: e.to_string(),
                }))
            }
        };
        let status = response.status().as_u16();
        let text = response.into_body().read_to_string();
        match (status, text) {
            (500..=599, text) => {
                Err(Attempt::Retry(format!("HTTP {status}: {}", text.map(|t| excerpt(&t)).unwrap_or_default())))
            }
            (_, Err(e)) => Err(Attempt::Retry(format!("reading response body: {e}"))),
            (200..=299, Ok(text)) => Ok(text),
            (_, Ok(text)) => Err(Attempt::Fatal(BackendError::Protocol {
                detail: format!("HTTP {status} from {url}"),
                excerpt: excerpt(&text),
            })),
        }
    }

    /// One logical request, with retries.
    fn request(&self, path: &str, body: Option<&serde_json::Value>) -> Result<String, BackendError> {
        let mut last = String::new();
        for attempt in 0..=self.cfg.max_retries {
            if attempt > 0 {
                let delay = self.cfg.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                thread::sleep(Duration::from_millis(delay));
            }
            match self.gate.hold(|| self.attempt(path, body)) {
                Ok(text) => return Ok(text),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(reason)) => last = reason,
            }
        }
        Err(BackendError::Unavailable {
            backend: self.id_string(),
            detail: format!("{path} failed after {} attempts: {last}", self.cfg.max_retries + 1),
        })
    }

    fn post_batch<I: Serialize, R: DeserializeOwned>(&self, path: &str, items: &[I]) -> Result<Vec<R>, BackendError> {
        let body = serde_json::to_value(WireRequest { items }).expect("wire request serializes");
        let text = self.request(path, Some(&body))?;
        let response: WireResponse<R> = serde_json::from_str(&text)
            .map_err(|e| BackendError::Protocol { detail: format!("{path}: {e}"), excerpt: excerpt(&text) })?;
        if response.results.len() != items.len() {
            return Err(BackendError::Protocol {
                detail: format!("{path}: sent {} items, got {} results", items.len(), response.results.len()),
                excerpt: excerpt(&text),
            });
        }
        Ok(response.results)
    }

    /// Sends every chunk and stitches the results back together in order.
    fn batched<I, R>(
        &self,
        path: &str,
        items: &[I],
        check: impl Fn(&I, &R) -> Result<(), String> + Sync,
    ) -> Result<Vec<R>, BackendError>
    where
        I: Serialize + Sync,
        R: DeserializeOwned + Send,
    {
        let chunks: Vec<&[I]> = items.chunks(self.cfg.max_batch).collect();
        let answers = parallel_map(&chunks, self.cfg.max_in_flight, |_, chunk| {
            let results: Vec<R> = self.post_batch(path, chunk)?;
            for (item, result) in chunk.iter().zip(&results) {
                check(item, result).map_err(|detail| BackendError::Protocol {
                    detail: format!("{path}: {detail}"),
                    excerpt: String::new(),
                })?;
            }
            Ok::<_, BackendError>(results)
        })
        .map_err(|(_, e)| e)?;
        Ok(answers.into_iter().flatten().collect())
    }

    /// Extracts aspect terms for every item.
    pub fn remote_ate(&self, items: &[AteItem]) -> Result<Vec<AteResult>, BackendError> {
        self.batched("/v1/ate", items, |item: &AteItem, result: &AteResult| {
            if item.id != result.id {
                return Err(format!("expected id {:?}, got {:?}", item.id, result.id));
            }
            Ok(())
        })
    }

    /// Classifies every (text, term) item.
    pub fn remote_asc(&self, items: &[AscItem]) -> Result<Vec<AscResult>, BackendError> {
        self.batched("/v1/asc", items, |item: &AscItem, result: &AscResult| {
            if item.id != result.id {
                return Err(format!("expected id {:?}, got {:?}", item.id, result.id));
            }
            if item.term != result.term {
                return Err(format!("item {}: expected term {:?}, got {:?}", item.id, item.term, result.term));
            }
            AscPrediction { polarity: result.polarity, scores: Some(result.scores.clone()) }
                .validate()
                .map_err(|e| format!("item {}: {e}", item.id))
        })
    }

    /// `GET /v1/health`. 503 while the service is loading counts as a
    /// transient failure.
    pub fn health(&self) -> Result<serde_json::Value, BackendError> {
        let text = self.request("/v1/health", None)?;
        serde_json::from_str(&text)
            .map_err(|e| BackendError::Protocol { detail: format!("/v1/health: {e}"), excerpt: excerpt(&text) })
    }

    fn id_string(&self) -> String {
        format!("remote:{}", self.cfg.base_url.trim_end_matches('/'))
    }
}

/// Version string reported by a health body, if any.
pub fn service_version(health: &serde_json::Value) -> Option<String> {
    health.get("service_version").and_then(|v| v.as_str()).map(str::to_string)
}

impl AteBackend for RemoteBackend {
    fn id(&self) -> String {
        self.id_string()
    }

    fn extract(&self, text: &str) -> Result<Vec<String>, BackendError> {
        let item = AteItem { id: "0".into(), text: text.into() };
        let mut results = self.remote_ate(std::slice::from_ref(&item))?;
        Ok(results.pop().map(|r| r.terms).unwrap_or_default())
    }
}

impl AscBackend for RemoteBackend {
    fn id(&self) -> String {
        self.id_string()
    }

    fn classify(&self, text: &str, term: &str) -> Result<AscPrediction, BackendError> {
        let item = AscItem { id: "0".into(), text: text.into(), term: term.into() };
        let result = self
            .remote_asc(std::slice::from_ref(&item))?
            .pop()
            .ok_or_else(|| BackendError::Protocol { detail: "empty ASC response".into(), excerpt: String::new() })?;
        Ok(AscPrediction { polarity: result.polarity, scores: Some(result.scores) })
    }
}
