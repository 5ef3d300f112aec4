use super::{text_hash, EmbeddingMatrix, TextEmbedder, TokenEmbedder, TokenEmbeddings};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

/// `{"text_hash": ..., "vector": [...]}`
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TextVectorRecord {
    pub text_hash: String,
    pub vector: Vec<f64>,
}

/// `{"text_hash": ..., "tokens": [...], "matrix": [[...]]}`
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TokenMatrixRecord {
    pub text_hash: String,
    pub tokens: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for line in file.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Lookup-table text embedder keyed by [`text_hash`].
#[derive(Debug, Clone, Default)]
pub struct FixtureTextEmbedder {
    vectors: HashMap<String, Vec<f64>>,
}

impl FixtureTextEmbedder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_jsonl(path: &Path) -> Result<Self> {
        let mut out = Self::new();
        for r in read_jsonl::<TextVectorRecord>(path)? {
            out.vectors.insert(r.text_hash, r.vector);
        }
        Ok(out)
    }

    pub fn insert(&mut self, text: &str, vector: Vec<f64>) {
        self.vectors.insert(text_hash(text), vector);
    }
}

impl TextEmbedder for FixtureTextEmbedder {
    fn backend_id(&self) -> &str {
        "fixture-text"
    }

    fn embed_raw(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        texts
            .iter()
            .map(|t| {
                self.vectors
                    .get(&text_hash(t))
                    .cloned()
                    .ok_or_else(|| Error::FixtureMissing(format!("text embedding for {t:?}")))
            })
            .collect()
    }
}

/// Lookup-table token embedder keyed by [`text_hash`].
#[derive(Debug, Clone, Default)]
pub struct FixtureTokenEmbedder {
    records: HashMap<String, TokenMatrixRecord>,
}

impl FixtureTokenEmbedder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_jsonl(path: &Path) -> Result<Self> {
        let mut out = Self::new();
        for r in read_jsonl::<TokenMatrixRecord>(path)? {
            out.records.insert(r.text_hash.clone(), r);
        }
        Ok(out)
    }

    pub fn insert(&mut self, text: &str, tokens: Vec<String>, matrix: Vec<Vec<f64>>) {
        let text_hash = text_hash(text);
        self.records.insert(text_hash.clone(), TokenMatrixRecord { text_hash, tokens, matrix });
    }
}

impl TokenEmbedder for FixtureTokenEmbedder {
    fn backend_id(&self) -> &str {
        "fixture-token"
    }

    fn embed_tokens(&self, text: &str) -> Result<TokenEmbeddings> {
        let r = self
            .records
            .get(&text_hash(text))
            .ok_or_else(|| Error::FixtureMissing(format!("token embeddings for {text:?}")))?;
        let m = EmbeddingMatrix::from_rows(r.text_hash.clone(), r.matrix.clone())?;
        TokenEmbeddings::new(r.tokens.clone(), m)
    }
}
