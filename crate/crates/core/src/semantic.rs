//! Clipped BERTScore-F1 between the generated and reference answers.
//!
//! Greedy token matching over contextual embeddings, without idf weighting
//! or baseline rescaling.

pub use crate::embedding::TokenEmbeddings;
use crate::embedding::{dot, TokenEmbedder};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrfScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Harmonic mean, defined as 0 when `p + r <= 0`.
pub fn harmonic_f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

pub fn bertscore_prf(candidate: &TokenEmbeddings, reference: &TokenEmbeddings) -> Result<PrfScore> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(Error::EmptyInput("BERTScore needs at least one token on each side".into()));
    }
    let (c, r) = (&candidate.vectors, &reference.vectors);
    if c.dim() != r.dim() {
        return Err(Error::DimensionMismatch { expected: c.dim(), got: r.dim() });
    }
    // rows are unit norm, so dot products are cosines
    let sim: Vec<Vec<f64>> =
        c.iter_rows().map(|h| r.iter_rows().map(|g| dot(h, g).clamp(-1.0, 1.0)).collect()).collect();

    let precision =
        sim.iter().map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max)).sum::<f64>() / c.rows() as f64;
    let recall = (0..r.rows()).map(|j| sim.iter().map(|row| row[j]).fold(f64::NEG_INFINITY, f64::max)).sum::<f64>()
        / r.rows() as f64;

    Ok(PrfScore { precision, recall, f1: harmonic_f1(precision, recall) })
}

fn present(s: Option<&str>) -> Option<&str> {
    s.filter(|t| !t.trim().is_empty())
}

/// `clip(F1, 0, 1)`, or 0 when either answer is absent.
pub fn semantic_reward(answer: Option<&str>, ref_answer: Option<&str>, provider: &dyn TokenEmbedder) -> Result<f64> {
    let (Some(a), Some(b)) = (present(answer), present(ref_answer)) else {
        return Ok(0.0);
    };
    let cand = provider.embed_tokens(a)?;
    let reference = provider.embed_tokens(b)?;
    Ok(bertscore_prf(&cand, &reference)?.f1.clamp(0.0, 1.0))
}
