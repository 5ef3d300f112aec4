use super::{EmbeddingMatrix, TextEmbedder, TokenEmbedder, TokenEmbeddings};
use crate::error::{Error, Result};
use crate::remote::{HttpClient, RemoteConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize)]
struct EmbedRequest<'a> {
    id: String,
    kind: &'static str,
    inputs: &'a [&'a str],
}

#[derive(Debug, Deserialize)]
struct EmbedResponse {
    id: String,
    dim: usize,
    #[serde(default)]
    vectors: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    matrices: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default)]
    tokens: Option<Vec<Vec<String>>>,
}

/// Client for an external embedding service (`POST {endpoint}/embed`).
///
/// Inputs are split into batches of `batch_size` and sent with at most
/// `max_in_flight` requests outstanding. Each request carries a unique id
/// that the response must echo.
pub struct RemoteEmbedder {
    client: HttpClient,
    id: String,
}

impl RemoteEmbedder {
    pub fn new(cfg: RemoteConfig) -> Result<Self> {
        let id = format!("remote:{}", cfg.endpoint);
        Ok(Self { client: HttpClient::new(cfg)?, id })
    }

    fn call(&self, kind: &'static str, inputs: &[&str]) -> Result<Vec<EmbedResponse>> {
        let cfg = self.client.config();
        let batches: Vec<&[&str]> = inputs.chunks(cfg.batch_size.max(1)).collect();
        let mut out = Vec::with_capacity(batches.len());
        for wave in batches.chunks(cfg.max_in_flight.max(1)) {
            let results: Vec<Result<EmbedResponse>> = std::thread::scope(|s| {
                let handles: Vec<_> = wave
                    .iter()
                    .map(|batch| {
                        s.spawn(move || {
                            let req = EmbedRequest { id: self.client.next_id(), kind, inputs: batch };
                            let resp: EmbedResponse = self.client.post_json("/embed", &req)?;
                            if resp.id != req.id {
                                return Err(Error::Backend(format!(
                                    "response id {:?} does not match request {:?}",
                                    resp.id, req.id
                                )));
                            }
                            Ok(resp)
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().unwrap_or_else(|_| Err(Error::Backend("worker panicked".into()))))
                    .collect()
            });
            for r in results {
                out.push(r?);
            }
        }
        Ok(out)
    }
}

impl TextEmbedder for RemoteEmbedder {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn embed_raw(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(texts.len());
        for resp in self.call("text", texts)? {
            let vectors = resp.vectors.ok_or_else(|| Error::Backend("text response without vectors".into()))?;
            if let Some(v) = vectors.iter().find(|v| v.len() != resp.dim) {
                return Err(Error::DimensionMismatch { expected: resp.dim, got: v.len() });
            }
            out.extend(vectors);
        }
        if out.len() != texts.len() {
            return Err(Error::Backend(format!("asked for {} vectors, got {}", texts.len(), out.len())));
        }
        Ok(out)
    }
}

impl TokenEmbedder for RemoteEmbedder {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn embed_tokens(&self, text: &str) -> Result<TokenEmbeddings> {
        if text.trim().is_empty() {
            return Err(Error::EmptyInput("text to embed is blank".into()));
        }
        let mut resp = self.call("token", &[text])?.remove(0);
        let matrix = resp
            .matrices
            .take()
            .and_then(|mut m| (m.len() == 1).then(|| m.remove(0)))
            .ok_or_else(|| Error::Backend("token response must carry one matrix".into()))?;
        if let Some(v) = matrix.iter().find(|v| v.len() != resp.dim) {
            return Err(Error::DimensionMismatch { expected: resp.dim, got: v.len() });
        }
        let tokens = match resp.tokens.take().and_then(|mut t| t.pop()) {
            Some(t) => t,
            None => (0..matrix.len()).map(|i| format!("#{i}")).collect(),
        };
        TokenEmbeddings::new(tokens, EmbeddingMatrix::from_rows(super::text_hash(text), matrix)?)
    }
}
