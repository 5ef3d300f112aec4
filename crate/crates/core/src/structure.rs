//! Structured-completion parsing and the dense format reward.
//!
//! A completion is expected to look like
//!
//! ```text
//! <perception> ... </perception><think> ... </think><answer> ... </answer>
//! ```
//!
//! Each block is extracted independently. A block is present only when its
//! open and close tags each occur exactly once and the open tag comes first;
//! anything else (missing, duplicated, inverted) yields `None`. Empty blocks
//! are also `None`, so every downstream reward sees a single "absent" state.

use serde::{Deserialize, Serialize};

pub const PERCEPTION_OPEN: &str = "<perception>";
pub const PERCEPTION_CLOSE: &str = "</perception>";
pub const THINK_OPEN: &str = "<think>";
pub const THINK_CLOSE: &str = "</think>";
pub const ANSWER_OPEN: &str = "<answer>";
pub const ANSWER_CLOSE: &str = "</answer>";

/// The six required tags in canonical stage order.
pub const REQUIRED_TAGS: [&str; 6] =
    [PERCEPTION_OPEN, PERCEPTION_CLOSE, THINK_OPEN, THINK_CLOSE, ANSWER_OPEN, ANSWER_CLOSE];

/// One sampled output together with its extracted segments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub raw: String,
    pub perception: Option<String>,
    pub think: Option<String>,
    pub answer: Option<String>,
}

impl Completion {
    /// Re-wraps the present segments in canonical tags.
    pub fn to_canonical(&self) -> String {
        let mut out = String::new();
        for (seg, open, close) in [
            (&self.perception, PERCEPTION_OPEN, PERCEPTION_CLOSE),
            (&self.think, THINK_OPEN, THINK_CLOSE),
            (&self.answer, ANSWER_OPEN, ANSWER_CLOSE),
        ] {
            if let Some(s) = seg {
                out.push_str(open);
                out.push_str(s);
                out.push_str(close);
            }
        }
        out
    }
}

/// Reference structured output; only its answer block is scored against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceOutput {
    pub raw: String,
    pub answer: Option<String>,
}

impl ReferenceOutput {
    pub fn parse(raw: &str) -> Self {
        Self { raw: raw.to_string(), answer: extract_segment(raw, ANSWER_OPEN, ANSWER_CLOSE) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormatScore {
    pub tag_score: f64,
    pub order_score: f64,
    pub boundary_score: f64,
    pub total: f64,
}

/// Extracts the trimmed text between `open` and `close`, or `None` when
/// either tag does not occur exactly once, they are inverted, or the
/// content is blank.
pub fn extract_segment(raw: &str, open: &str, close: &str) -> Option<String> {
    if raw.matches(open).count() != 1 || raw.matches(close).count() != 1 {
        return None;
    }
    let start = raw.find(open)? + open.len();
    let end = raw.find(close)?;
    if end < start {
        return None;
    }
    let seg = raw[start..end].trim();
    (!seg.is_empty()).then(|| seg.to_string())
}

pub fn parse_completion(raw: &str) -> Completion {
    Completion {
        raw: raw.to_string(),
        perception: extract_segment(raw, PERCEPTION_OPEN, PERCEPTION_CLOSE),
        think: extract_segment(raw, THINK_OPEN, THINK_CLOSE),
        answer: extract_segment(raw, ANSWER_OPEN, ANSWER_CLOSE),
    }
}

/// Required-tag occurrences in textual order, as indices into [`REQUIRED_TAGS`].
fn tag_sequence(raw: &str) -> Vec<usize> {
    let mut hits: Vec<(usize, usize)> = REQUIRED_TAGS
        .iter()
        .enumerate()
        .flat_map(|(i, tag)| raw.match_indices(tag).map(move |(pos, _)| (pos, i)))
        .collect();
    hits.sort_unstable();
    hits.into_iter().map(|(_, i)| i).collect()
}

/// Dense format reward: tag existence + stage order + boundary terms.
pub fn format_reward(raw: &str) -> FormatScore {
    let tag_score: f64 = REQUIRED_TAGS.iter().map(|tag| if raw.matches(tag).count() == 1 { 0.5 } else { -0.5 }).sum();

    let order_score = if tag_sequence(raw) == [0, 1, 2, 3, 4, 5] { 1.0 } else { 0.0 };

    let trimmed = raw.trim();
    let start = if trimmed.starts_with(PERCEPTION_OPEN) { 0.5 } else { -1.0 };
    let end = if trimmed.ends_with(ANSWER_CLOSE) { 0.5 } else { -1.0 };
    let boundary_score = start + end;

    FormatScore { tag_score, order_score, boundary_score, total: tag_score + order_score + boundary_score }
}
