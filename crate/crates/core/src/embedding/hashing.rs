use super::{EmbeddingMatrix, TextEmbedder, TokenEmbedder, TokenEmbeddings};
use crate::error::{Error, Result};
use crate::lexical::normalize;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Deterministic, model-free embedder.
///
/// Every feature string seeds a dense pseudo-random vector. Sentence vectors
/// sum unigram and (half-weight) bigram features of the normalized tokens;
/// token vectors mix each token with its neighbours so identical words in
/// different contexts get different, but similar, vectors. Shared words
/// therefore raise cosine similarity, which is all the reward math needs
/// from a fixture backend.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
    id: String,
}

const BIGRAM_WEIGHT: f64 = 0.5;
const NEIGHBOUR_WEIGHT: f64 = 0.35;

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim, id: format!("hashing-{dim}") }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn feature(&self, key: &str) -> Vec<f64> {
        let digest = Sha256::digest(key.as_bytes());
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        let mut rng = ChaCha8Rng::from_seed(seed);
        (0..self.dim).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn accumulate(acc: &mut [f64], v: &[f64], w: f64) {
        acc.iter_mut().zip(v).for_each(|(a, b)| *a += w * b);
    }

    /// Unnormalized sentence vector.
    pub fn sentence_vector(&self, text: &str) -> Vec<f64> {
        let tokens = normalize(text);
        let mut acc = vec![0.0; self.dim];
        if tokens.is_empty() {
            let trimmed = text.trim();
            if !trimmed.is_empty() {
                Self::accumulate(&mut acc, &self.feature(&format!("raw:{trimmed}")), 1.0);
            }
            return acc;
        }
        for t in tokens.iter() {
            Self::accumulate(&mut acc, &self.feature(&format!("w:{t}")), 1.0);
        }
        for pair in tokens.as_slice().windows(2) {
            let key = format!("b:{} {}", pair[0], pair[1]);
            Self::accumulate(&mut acc, &self.feature(&key), BIGRAM_WEIGHT);
        }
        acc
    }
}

impl TextEmbedder for HashingEmbedder {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn embed_raw(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        Ok(texts.iter().map(|t| self.sentence_vector(t)).collect())
    }
}

impl TokenEmbedder for HashingEmbedder {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn embed_tokens(&self, text: &str) -> Result<TokenEmbeddings> {
        let tokens = normalize(text).into_vec();
        if tokens.is_empty() {
            return Err(Error::EmptyInput(format!("no tokens in {text:?}")));
        }
        let base: Vec<Vec<f64>> = tokens.iter().map(|t| self.feature(&format!("w:{t}"))).collect();
        let rows = (0..tokens.len())
            .map(|i| {
                let mut row = base[i].clone();
                if i > 0 {
                    Self::accumulate(&mut row, &base[i - 1], NEIGHBOUR_WEIGHT);
                }
                if i + 1 < base.len() {
                    Self::accumulate(&mut row, &base[i + 1], NEIGHBOUR_WEIGHT);
                }
                row
            })
            .collect();
        let matrix = EmbeddingMatrix::from_rows(super::text_hash(text), rows)?;
        TokenEmbeddings::new(tokens, matrix)
    }
}
