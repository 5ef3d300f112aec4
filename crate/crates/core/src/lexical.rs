//! Lexical answer-copy detection for the reasoning block.
//!
//! Reasoning sentences that lexically reproduce the model's own answer are
//! flagged with a three-way rule (exact 4-gram, or 3-gram plus moderate
//! answer recall, or high answer recall), removed from the block that feeds
//! the likelihood-gain term, and counted into a copy penalty.

use crate::visual::split_sentences;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::sync::LazyLock;

static TAG_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<[^<>]*>").unwrap());
static PUNCT_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\p{P}").unwrap());

/// Lowercased, tag- and punctuation-free tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<String> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.0.iter()
    }

    /// Space-joined form; `normalize` maps it to itself.
    pub fn joined(&self) -> String {
        self.0.join(" ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CueThresholds {
    pub tau_low: f64,
    pub tau_high: f64,
}

impl Default for CueThresholds {
    fn default() -> Self {
        Self { tau_low: 0.5, tau_high: 0.8 }
    }
}

impl CueThresholds {
    pub fn new(tau_low: f64, tau_high: f64) -> crate::Result<Self> {
        let t = Self { tau_low, tau_high };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> crate::Result<()> {
        if !(0.0..=1.0).contains(&self.tau_low) || !(0.0..=1.0).contains(&self.tau_high) || self.tau_low > self.tau_high
        {
            return Err(crate::Error::Config(format!(
                "cue thresholds must satisfy 0 <= tau_low <= tau_high <= 1, got {} / {}",
                self.tau_low, self.tau_high
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanResult {
    pub kept_sentences: Vec<String>,
    pub flags: Vec<bool>,
    pub copy_penalty: f64,
}

pub fn normalize(text: &str) -> TokenSeq {
    let lower = text.to_lowercase();
    let untagged = TAG_RE.replace_all(&lower, " ");
    let unpunct = PUNCT_RE.replace_all(&untagged, " ");
    TokenSeq(unpunct.split_whitespace().map(str::to_string).collect())
}

fn ngrams(tokens: &[String], n: usize) -> HashSet<&[String]> {
    tokens.windows(n).collect()
}

/// Whether the exact `n`-gram sets of `a` and `b` intersect.
pub fn ngram_overlap(a: &TokenSeq, b: &TokenSeq, n: usize) -> bool {
    if n == 0 || a.len() < n || b.len() < n {
        return false;
    }
    let grams = ngrams(a.as_slice(), n);
    b.as_slice().windows(n).any(|g| grams.contains(g))
}

/// Longest common subsequence length over tokens.
pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `LCS(sentence, answer) / max(1, |answer|)`.
pub fn answer_recall_rouge_l(sentence: &TokenSeq, answer: &TokenSeq) -> f64 {
    lcs_len(sentence.as_slice(), answer.as_slice()) as f64 / answer.len().max(1) as f64
}

pub fn detect_cue(sentence: &TokenSeq, answer: &TokenSeq, th: &CueThresholds) -> bool {
    if ngram_overlap(sentence, answer, 4) {
        return true;
    }
    let recall = answer_recall_rouge_l(sentence, answer);
    (ngram_overlap(sentence, answer, 3) && recall > th.tau_low) || recall > th.tau_high
}

/// Flags answer-copying reasoning sentences, drops them, and computes the
/// copy penalty (fraction flagged; 1 when there is no reasoning sentence).
pub fn clean_and_penalize(reasoning: Option<&str>, answer: Option<&str>, th: &CueThresholds) -> CleanResult {
    let sentences = reasoning.map(split_sentences).unwrap_or_default();
    if sentences.is_empty() {
        return CleanResult { kept_sentences: Vec::new(), flags: Vec::new(), copy_penalty: 1.0 };
    }
    let answer = answer.map(normalize).unwrap_or_default();
    let flags: Vec<bool> =
        sentences.iter().map(|s| !answer.is_empty() && detect_cue(&normalize(s), &answer, th)).collect();
    let kept_sentences = sentences.iter().zip(&flags).filter(|(_, &f)| !f).map(|(s, _)| s.clone()).collect();
    let copy_penalty = flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64;
    CleanResult { kept_sentences, flags, copy_penalty }
}
