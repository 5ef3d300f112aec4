//! Scene–text alignment reward between the perception block and clip frames.
//!
//! Two aggregations are provided. `Max` embeds the whole perception text and
//! keeps the best-matching frame. `SentTopK` embeds each sentence, averages
//! its `K = max(1, floor(alpha * N))` best frame similarities, then averages
//! over sentences.

use crate::embedding::{dot, embed_texts, EmbeddingMatrix, TextEmbedder};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentVariant {
    #[default]
    Max,
    SentTopk,
}

impl std::str::FromStr for AlignmentVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Self::Max),
            "sent_topk" => Ok(Self::SentTopk),
            other => Err(Error::Config(format!("unknown variant {other:?} (max|sent_topk)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentConfig {
    pub alpha: f64,
    pub variant: AlignmentVariant,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        Self { alpha: 0.2, variant: AlignmentVariant::Max }
    }
}

impl AlignmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha must be in (0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Splits on newlines and after runs of `.`, `!`, `?` (kept with their
/// sentence); fragments are trimmed and blanks dropped.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut chars = text.chars().peekable();
    let mut flush = |cur: &mut String| {
        let t = cur.trim();
        if !t.is_empty() {
            out.push(t.to_string());
        }
        cur.clear();
    };
    while let Some(c) = chars.next() {
        match c {
            '\n' => flush(&mut cur),
            '.' | '!' | '?' => {
                cur.push(c);
                if !matches!(chars.peek(), Some('.' | '!' | '?')) {
                    flush(&mut cur);
                }
            }
            _ => cur.push(c),
        }
    }
    flush(&mut cur);
    out
}

/// `max(1, floor(alpha * n))`. A 1e-9 slack absorbs decimal ratios such as
/// 0.3 whose binary value sits just below the intended product.
pub fn top_k_count(alpha: f64, n: usize) -> usize {
    ((alpha * n as f64 + 1e-9).floor() as usize).clamp(1, n.max(1))
}

/// Mean of the `k` largest values; ties at the cut go to the lower index.
pub fn top_k_mean(values: &[f64], k: usize) -> f64 {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let k = k.min(values.len());
    idx[..k].iter().map(|&i| values[i]).sum::<f64>() / k as f64
}

fn present(perception: Option<&str>) -> Option<&str> {
    perception.filter(|p| !p.trim().is_empty())
}

pub fn clip_max(frames: &EmbeddingMatrix, perception: Option<&str>, provider: &dyn TextEmbedder) -> Result<f64> {
    let Some(text) = present(perception) else {
        return Ok(0.0);
    };
    let u = embed_texts(&[text], provider)?.remove(0);
    check_dim(frames, &u)?;
    Ok(frames.iter_rows().map(|v| dot(v, &u)).fold(f64::NEG_INFINITY, f64::max))
}

/// Frame-by-sentence similarity matrix `S[j][m] = v_j . u_m`.
pub fn similarity_matrix(frames: &EmbeddingMatrix, sentences: &[Vec<f64>]) -> Vec<Vec<f64>> {
    frames.iter_rows().map(|v| sentences.iter().map(|u| dot(v, u)).collect()).collect()
}

/// Sentence Top-K aggregation over a precomputed `N x M` similarity matrix.
pub fn sent_topk_from_similarities(sim: &[Vec<f64>], alpha: f64) -> f64 {
    let n = sim.len();
    let m = sim.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return 0.0;
    }
    let k = top_k_count(alpha, n);
    let per_sentence: f64 = (0..m)
        .map(|col| {
            let column: Vec<f64> = sim.iter().map(|row| row[col]).collect();
            top_k_mean(&column, k)
        })
        .sum();
    per_sentence / m as f64
}

pub fn clip_sent_topk(
    frames: &EmbeddingMatrix,
    perception: Option<&str>,
    cfg: &AlignmentConfig,
    provider: &dyn TextEmbedder,
) -> Result<f64> {
    cfg.validate()?;
    let Some(text) = present(perception) else {
        return Ok(0.0);
    };
    let sentences = split_sentences(text);
    if sentences.is_empty() {
        return Ok(0.0);
    }
    let refs: Vec<&str> = sentences.iter().map(String::as_str).collect();
    let us = embed_texts(&refs, provider)?;
    if let Some(u) = us.first() {
        check_dim(frames, u)?;
    }
    Ok(sent_topk_from_similarities(&similarity_matrix(frames, &us), cfg.alpha))
}

/// Dispatches on the configured variant.
pub fn visual_reward(
    frames: &EmbeddingMatrix,
    perception: Option<&str>,
    cfg: &AlignmentConfig,
    provider: &dyn TextEmbedder,
) -> Result<f64> {
    match cfg.variant {
        AlignmentVariant::Max => clip_max(frames, perception, provider),
        AlignmentVariant::SentTopk => clip_sent_topk(frames, perception, cfg, provider),
    }
}

fn check_dim(frames: &EmbeddingMatrix, u: &[f64]) -> Result<()> {
    if u.len() != frames.dim() {
        return Err(Error::DimensionMismatch { expected: frames.dim(), got: u.len() });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::FixtureTextEmbedder;

    #[test]
    fn splitter_examples() {
        assert_eq!(split_sentences("A dark hall. Two men argue!"), vec!["A dark hall.", "Two men argue!"]);
        assert!(split_sentences("").is_empty());
        assert_eq!(split_sentences("no terminator"), vec!["no terminator"]);
        assert_eq!(split_sentences("Wait... what?!\n\n next"), vec!["Wait...", "what?!", "next"]);
    }

    #[test]
    fn k_values() {
        assert_eq!(top_k_count(0.2, 10), 2);
        assert_eq!(top_k_count(0.2, 4), 1);
        assert_eq!(top_k_count(1.0, 7), 7);
        assert_eq!(top_k_count(0.5, 1), 1);
        assert_eq!(top_k_count(0.3, 10), 3);
    }

    #[test]
    fn topk_fixture_matrix() {
        let s = vec![vec![0.9, 0.1], vec![0.5, 0.2], vec![0.1, 0.3]];
        assert!((sent_topk_from_similarities(&s, 0.5) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn tie_break_by_lower_index() {
        assert_eq!(top_k_mean(&[0.5, 0.7, 0.7, 0.1], 2), 0.7);
        assert_eq!(top_k_mean(&[0.3, 0.3, 0.3], 2), 0.3);
    }

    fn frames() -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows("c", vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap()
    }

    #[test]
    fn empty_perception_scores_zero() {
        let p = FixtureTextEmbedder::new();
        assert_eq!(clip_max(&frames(), None, &p).unwrap(), 0.0);
        assert_eq!(clip_max(&frames(), Some("  "), &p).unwrap(), 0.0);
        assert_eq!(clip_sent_topk(&frames(), None, &AlignmentConfig::default(), &p).unwrap(), 0.0);
    }

    #[test]
    fn max_hits_identical_row() {
        let mut p = FixtureTextEmbedder::new();
        p.insert("the hall", vec![0.0, 1.0, 0.0]);
        assert_eq!(clip_max(&frames(), Some("the hall"), &p).unwrap(), 1.0);
    }

    #[test]
    fn max_over_two_frames() {
        let u = [0.1, 0.7, (1.0f64 - 0.01 - 0.49).sqrt()];
        let f = EmbeddingMatrix::from_rows("c", vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        let mut p = FixtureTextEmbedder::new();
        p.insert("x", u.to_vec());
        assert!((clip_max(&f, Some("x"), &p).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn single_frame_single_sentence_reduces_to_max() {
        let f = EmbeddingMatrix::from_rows("c", vec![vec![0.6, 0.8]]).unwrap();
        let mut p = FixtureTextEmbedder::new();
        p.insert("One thing.", vec![1.0, 0.0]);
        let cfg = AlignmentConfig { alpha: 0.2, variant: AlignmentVariant::SentTopk };
        let a = clip_sent_topk(&f, Some("One thing."), &cfg, &p).unwrap();
        let b = clip_max(&f, Some("One thing."), &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_alpha_rejected() {
        let cfg = AlignmentConfig { alpha: 0.0, variant: AlignmentVariant::SentTopk };
        assert!(clip_sent_topk(&frames(), Some("x"), &cfg, &FixtureTextEmbedder::new()).is_err());
        assert_eq!("sent_topk".parse::<AlignmentVariant>().unwrap(), AlignmentVariant::SentTopk);
        assert!("topk".parse::<AlignmentVariant>().is_err());
    }
}
