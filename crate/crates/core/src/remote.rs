//! Blocking JSON-over-HTTP client shared by the remote providers.

use crate::error::{Error, Result};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    /// Base URL, e.g. `http://127.0.0.1:8080`.
    pub endpoint: String,
    pub timeout_ms: u64,
    /// Extra attempts after the first failure.
    pub retries: u32,
    pub max_in_flight: usize,
    pub batch_size: usize,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self { endpoint: endpoint.into(), timeout_ms: 30_000, retries: 2, max_in_flight: 4, batch_size: 32 }
    }
}

pub(crate) struct HttpClient {
    agent: ureq::Agent,
    cfg: RemoteConfig,
    counter: AtomicU64,
}

impl HttpClient {
    pub fn new(cfg: RemoteConfig) -> Result<Self> {
        if !cfg.endpoint.starts_with("http://") && !cfg.endpoint.starts_with("https://") {
            return Err(Error::Config(format!("endpoint must be an http(s) URL: {}", cfg.endpoint)));
        }
        let agent: ureq::Agent =
            ureq::Agent::config_builder().timeout_global(Some(Duration::from_millis(cfg.timeout_ms))).build().into();
        Ok(Self { agent, cfg, counter: AtomicU64::new(0) })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.cfg
    }

    pub fn next_id(&self) -> String {
        format!("req-{}", self.counter.fetch_add(1, Ordering::Relaxed))
    }

    pub fn post_json<Req: Serialize, Resp: DeserializeOwned>(&self, path: &str, body: &Req) -> Result<Resp> {
        let url = format!("{}{}", self.cfg.endpoint.trim_end_matches('/'), path);
        let mut last = String::new();
        for attempt in 0..=self.cfg.retries {
            match self.agent.post(&url).send_json(body) {
                Ok(mut resp) => match resp.body_mut().read_json::<Resp>() {
                    Ok(v) => return Ok(v),
                    Err(e) => last = format!("decoding response from {url}: {e}"),
                },
                Err(e) => last = format!("POST {url} (attempt {}): {e}", attempt + 1),
            }
            log::warn!("{last}");
        }
        Err(Error::Backend(last))
    }
}
