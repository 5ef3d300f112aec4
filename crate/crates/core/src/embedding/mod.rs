//! Embedding backends and cosine utilities.
//!
//! Three capabilities are modelled as separate traits so a backend only
//! implements what it can serve:
//!
//! * [`FrameSource`]: precomputed per-clip frame embeddings,
//! * [`TextEmbedder`]: one vector per input string,
//! * [`TokenEmbedder`]: one contextual vector per token of an input string.
//!
//! Every vector that leaves this module through [`embed_text`] or an
//! [`EmbeddingMatrix`] is unit norm.

mod cache;
mod fixture;
mod hashing;
mod remote;
mod store;

pub use cache::CachedTextEmbedder;
pub use fixture::{FixtureTextEmbedder, FixtureTokenEmbedder, TextVectorRecord, TokenMatrixRecord};
pub use hashing::HashingEmbedder;
pub use remote::RemoteEmbedder;
pub use store::{load_frame_embeddings, DirFrameStore, FrameFile, MemoryFrameStore};

use crate::error::{Error, Result};
use sha2::{Digest, Sha256};

/// Rows whose norm deviates from 1 by more than this are rescaled on load.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-4;
/// Rows (or vectors) with a smaller norm are rejected as degenerate.
pub const MIN_NORM: f64 = 1e-8;

/// Row-major matrix of unit-norm rows.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
    source_id: String,
}

impl EmbeddingMatrix {
    /// Builds a matrix, validating shape and finiteness and renormalizing
    /// rows that are not already unit norm within [`UNIT_NORM_TOLERANCE`].
    pub fn from_rows(source_id: impl Into<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let source_id = source_id.into();
        let dim = rows.first().map(Vec::len).ok_or_else(|| Error::InvalidMatrix(format!("{source_id}: no rows")))?;
        if dim == 0 {
            return Err(Error::InvalidMatrix(format!("{source_id}: zero dimension")));
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
            }
            let unit = normalize_vector(row).map_err(|e| Error::InvalidMatrix(format!("{source_id} row {i}: {e}")))?;
            data.extend(unit);
        }
        Ok(Self { rows: rows.len(), dim, data, source_id })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.iter_rows().map(<[f64]>::to_vec).collect()
    }
}

/// Token strings paired with one embedding row per token.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbeddings {
    pub tokens: Vec<String>,
    pub vectors: EmbeddingMatrix,
}

impl TokenEmbeddings {
    pub fn new(tokens: Vec<String>, vectors: EmbeddingMatrix) -> Result<Self> {
        if tokens.len() != vectors.rows() {
            return Err(Error::LengthMismatch { left: tokens.len(), right: vectors.rows() });
        }
        Ok(Self { tokens, vectors })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Precomputed frame embeddings, one matrix per clip in temporal order.
pub trait FrameSource: Send + Sync {
    fn load_frames(&self, clip_id: &str) -> Result<EmbeddingMatrix>;
}

/// Sentence/text encoder. Outputs need not be normalized.
pub trait TextEmbedder: Send + Sync {
    fn backend_id(&self) -> &str;
    fn embed_raw(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>>;
}

/// Contextual token encoder. Tokenization belongs to the backend.
pub trait TokenEmbedder: Send + Sync {
    fn backend_id(&self) -> &str;
    fn embed_tokens(&self, text: &str) -> Result<TokenEmbeddings>;
}

/// Hex SHA-256 of the exact text bytes; the key used by fixture files.
pub fn text_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Returns `v / |v|`, leaving `v` untouched if already unit within tolerance.
pub fn normalize_vector(v: &[f64]) -> Result<Vec<f64>> {
    if let Some(x) = v.iter().find(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("entry {x}")));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < MIN_NORM {
        return Err(Error::DegenerateEmbedding(format!("norm {norm:e}")));
    }
    if (norm - 1.0).abs() <= UNIT_NORM_TOLERANCE {
        Ok(v.to_vec())
    } else {
        Ok(v.iter().map(|x| x / norm).collect())
    }
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Cosine similarity clamped to `[-1, 1]`.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: u.len(), got: v.len() });
    }
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if nu < MIN_NORM || nv < MIN_NORM {
        return Err(Error::DegenerateEmbedding("zero-norm input to cosine".into()));
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Embeds one nonblank string and returns a unit vector.
pub fn embed_text(text: &str, provider: &dyn TextEmbedder) -> Result<Vec<f64>> {
    let mut out = embed_texts(&[text], provider)?;
    Ok(out.remove(0))
}

/// Batch form of [`embed_text`]; output order matches input order.
pub fn embed_texts(texts: &[&str], provider: &dyn TextEmbedder) -> Result<Vec<Vec<f64>>> {
    if texts.iter().any(|t| t.trim().is_empty()) {
        return Err(Error::EmptyInput("text to embed is blank".into()));
    }
    let raw = provider.embed_raw(texts)?;
    if raw.len() != texts.len() {
        return Err(Error::Backend(format!(
            "{} returned {} vectors for {} inputs",
            provider.backend_id(),
            raw.len(),
            texts.len()
        )));
    }
    let dim = raw.first().map_or(0, Vec::len);
    raw.iter()
        .map(|v| {
            if v.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
            }
            normalize_vector(v)
        })
        .collect()
}
