//! Script-grounded dialogue dataset construction.
//!
//! Subtitle lines are filtered to one (user, assistant) speaker pair and
//! greedily grouped into alternating sessions under two continuity limits:
//! the assistant must start within `turn` of the user finishing, and the next
//! user line within `round` of the assistant finishing. Each assistant line
//! then becomes one training sample whose history is every earlier line of
//! the session and whose video clip ends before the target utterance starts.
//!
//! Times are held in integer milliseconds so boundary comparisons are exact.

mod srt;

pub use srt::{parse_srt, parse_srt_with_speakers, parse_timestamp, SrtParse};

use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashSet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubtitleLine {
    pub index: usize,
    pub start_ms: u64,
    pub end_ms: u64,
    pub speaker: String,
    pub text: String,
}

impl SubtitleLine {
    pub fn start(&self) -> f64 {
        ms_to_secs(self.start_ms)
    }

    pub fn end(&self) -> f64 {
        ms_to_secs(self.end_ms)
    }
}

pub fn ms_to_secs(ms: u64) -> f64 {
    ms as f64 / 1000.0
}

pub fn secs_to_ms(s: f64) -> Result<u64> {
    if !(s.is_finite() && s >= 0.0) {
        return Err(Error::Dataset(format!("invalid time {s}")));
    }
    Ok((s * 1000.0).round() as u64)
}

/// Maximum gaps, in milliseconds, both inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Continuity {
    pub turn_ms: u64,
    pub round_ms: u64,
}

impl Default for Continuity {
    fn default() -> Self {
        Self { turn_ms: 10_000, round_ms: 20_000 }
    }
}

impl Continuity {
    pub fn from_secs(turn: f64, round: f64) -> Result<Self> {
        Ok(Self { turn_ms: secs_to_ms(turn)?, round_ms: secs_to_ms(round)? })
    }

    /// `next` may follow `prev` when it starts no earlier than `prev` ends
    /// and no later than `limit` after it.
    fn admits(prev: &SubtitleLine, next: &SubtitleLine, limit: u64) -> bool {
        next.start_ms >= prev.end_ms && next.start_ms - prev.end_ms <= limit
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DialogueSession {
    pub session_id: String,
    pub film_id: String,
    pub user_role: String,
    pub assistant_role: String,
    /// `u_1, a_1, u_2, a_2, ...`; always an even count.
    pub lines: Vec<SubtitleLine>,
}

impl DialogueSession {
    pub fn rounds(&self) -> usize {
        self.lines.len() / 2
    }

    /// Re-checks alternation, both gap limits and ordering.
    pub fn validate(&self, limits: &Continuity) -> Result<()> {
        if self.lines.is_empty() || !self.lines.len().is_multiple_of(2) {
            return Err(Error::Dataset(format!("{}: odd or empty line list", self.session_id)));
        }
        for (i, line) in self.lines.iter().enumerate() {
            let role = if i % 2 == 0 { &self.user_role } else { &self.assistant_role };
            if &line.speaker != role {
                return Err(Error::Dataset(format!("{}: line {i} breaks alternation", self.session_id)));
            }
            if i > 0 {
                let limit = if i % 2 == 1 { limits.turn_ms } else { limits.round_ms };
                if !Continuity::admits(&self.lines[i - 1], line, limit) {
                    return Err(Error::Dataset(format!(
                        "{}: gap before line {i} violates continuity",
                        self.session_id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Greedy session construction for one speaker pair.
///
/// A violation closes the current session, keeping its longest prefix that
/// ends on an assistant line, and scanning resumes at the next user line
/// (which may be the violating line itself).
pub fn build_sessions(
    lines: &[SubtitleLine],
    film_id: &str,
    user_role: &str,
    assistant_role: &str,
    limits: &Continuity,
) -> Vec<DialogueSession> {
    let mut sorted: Vec<&SubtitleLine> =
        lines.iter().filter(|l| l.speaker == user_role || l.speaker == assistant_role).collect();
    sorted.sort_by_key(|l| (l.start_ms, l.end_ms, l.index));

    let mut sessions = Vec::new();
    let mut current: Vec<SubtitleLine> = Vec::new();
    let mut close = |current: &mut Vec<SubtitleLine>| {
        if current.len() % 2 == 1 {
            current.pop();
        }
        if !current.is_empty() {
            sessions.push(DialogueSession {
                session_id: String::new(),
                film_id: film_id.to_string(),
                user_role: user_role.to_string(),
                assistant_role: assistant_role.to_string(),
                lines: std::mem::take(current),
            });
        }
        current.clear();
    };

    for line in sorted {
        let is_user = line.speaker == user_role;
        if let Some(prev) = current.last() {
            let expecting_user = current.len().is_multiple_of(2);
            let limit = if expecting_user { limits.round_ms } else { limits.turn_ms };
            if is_user == expecting_user && Continuity::admits(prev, line, limit) {
                current.push(line.clone());
                continue;
            }
            close(&mut current);
        }
        if is_user {
            current.push(line.clone());
        }
    }
    close(&mut current);

    for (n, s) in sessions.iter_mut().enumerate() {
        s.session_id = format!("{film_id}/{user_role}/{assistant_role}/{:04}", n + 1);
    }
    sessions
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub session_id: String,
    pub film_id: String,
    pub user_role: String,
    pub assistant_role: String,
    pub history: Vec<SubtitleLine>,
    pub target: SubtitleLine,
    pub clip_start_ms: u64,
    pub clip_end_ms: u64,
}

impl TrainingSample {
    pub fn clip_start(&self) -> f64 {
        ms_to_secs(self.clip_start_ms)
    }

    pub fn clip_end(&self) -> f64 {
        ms_to_secs(self.clip_end_ms)
    }

    /// No clip frame may overlap the target utterance.
    pub fn is_leakage_free(&self) -> bool {
        self.clip_end_ms <= self.target.start_ms
    }
}

/// One sample per round `k`: history `u_1..u_k`, target `a_k`, clip
/// `[s(u_1), e(u_k)]`. Samples whose clip would overlap the target are
/// dropped.
pub fn split_turns(session: &DialogueSession) -> Vec<TrainingSample> {
    let Some(first) = session.lines.first() else {
        return Vec::new();
    };
    (0..session.rounds())
        .filter_map(|k| {
            let user = &session.lines[2 * k];
            let sample = TrainingSample {
                session_id: session.session_id.clone(),
                film_id: session.film_id.clone(),
                user_role: session.user_role.clone(),
                assistant_role: session.assistant_role.clone(),
                history: session.lines[..=2 * k].to_vec(),
                target: session.lines[2 * k + 1].clone(),
                clip_start_ms: first.start_ms,
                clip_end_ms: user.end_ms,
            };
            if sample.is_leakage_free() {
                Some(sample)
            } else {
                log::warn!("{}: round {} clip overlaps target, dropped", session.session_id, k + 1);
                None
            }
        })
        .collect()
}

/// Session-disjoint train/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionSplit {
    pub train: Vec<TrainingSample>,
    pub test: Vec<TrainingSample>,
}

impl SessionSplit {
    pub fn session_ids(samples: &[TrainingSample]) -> BTreeSet<&str> {
        samples.iter().map(|s| s.session_id.as_str()).collect()
    }

    /// Number of session ids present in both splits.
    pub fn overlap(&self) -> usize {
        let train = Self::session_ids(&self.train);
        Self::session_ids(&self.test).intersection(&train).count()
    }
}

/// Shuffles the sorted session ids with `seed`, then moves whole sessions
/// into test until it holds at least `test_fraction` of all samples. At
/// least one session always stays in train.
pub fn split_by_session(samples: &[TrainingSample], test_fraction: f64, seed: u64) -> Result<SessionSplit> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Dataset(format!("test_fraction must be in (0, 1), got {test_fraction}")));
    }
    let mut ids: Vec<&str> = SessionSplit::session_ids(samples).into_iter().collect();
    if ids.len() < 2 {
        return Err(Error::Dataset(format!("need at least 2 sessions to split, got {}", ids.len())));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let goal = test_fraction * samples.len() as f64;
    let mut test_ids = HashSet::new();
    let mut test_count = 0usize;
    for id in &ids[..ids.len() - 1] {
        if test_count as f64 >= goal {
            break;
        }
        test_ids.insert(*id);
        test_count += samples.iter().filter(|s| s.session_id == *id).count();
    }
    let (test, train) = samples.iter().cloned().partition(|s| test_ids.contains(s.session_id.as_str()));
    Ok(SessionSplit { train, test })
}

/// Serialized utterance inside a sample record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineRecord {
    pub speaker: String,
    pub text: String,
    pub start: f64,
    pub end: f64,
}

/// Line-delimited sample record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub session_id: String,
    pub film_id: String,
    pub user_role: String,
    pub assistant_role: String,
    pub history: Vec<LineRecord>,
    pub target: LineRecord,
    pub clip_start: f64,
    pub clip_end: f64,
}

impl From<&SubtitleLine> for LineRecord {
    fn from(l: &SubtitleLine) -> Self {
        Self { speaker: l.speaker.clone(), text: l.text.clone(), start: l.start(), end: l.end() }
    }
}

impl From<&TrainingSample> for SampleRecord {
    fn from(s: &TrainingSample) -> Self {
        Self {
            session_id: s.session_id.clone(),
            film_id: s.film_id.clone(),
            user_role: s.user_role.clone(),
            assistant_role: s.assistant_role.clone(),
            history: s.history.iter().map(LineRecord::from).collect(),
            target: (&s.target).into(),
            clip_start: s.clip_start(),
            clip_end: s.clip_end(),
        }
    }
}

impl LineRecord {
    fn to_line(&self, index: usize) -> Result<SubtitleLine> {
        Ok(SubtitleLine {
            index,
            start_ms: secs_to_ms(self.start)?,
            end_ms: secs_to_ms(self.end)?,
            speaker: self.speaker.clone(),
            text: self.text.clone(),
        })
    }
}

impl SampleRecord {
    pub fn to_sample(&self) -> Result<TrainingSample> {
        let history = self.history.iter().enumerate().map(|(i, l)| l.to_line(i)).collect::<Result<Vec<_>>>()?;
        Ok(TrainingSample {
            session_id: self.session_id.clone(),
            film_id: self.film_id.clone(),
            user_role: self.user_role.clone(),
            assistant_role: self.assistant_role.clone(),
            target: self.target.to_line(history.len())?,
            history,
            clip_start_ms: secs_to_ms(self.clip_start)?,
            clip_end_ms: secs_to_ms(self.clip_end)?,
        })
    }
}

/// Everything extracted from one film.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilmOutput {
    pub sessions: Vec<DialogueSession>,
    pub samples: Vec<TrainingSample>,
    pub warnings: Vec<String>,
}

/// Parses one subtitle file and extracts samples for every role pair.
pub fn process_film(
    film_id: &str,
    srt_content: &str,
    speakers: &std::collections::HashMap<usize, String>,
    role_pairs: &[(String, String)],
    limits: &Continuity,
) -> Result<FilmOutput> {
    let parsed = parse_srt_with_speakers(srt_content, speakers)?;
    let mut out = FilmOutput {
        warnings: parsed.warnings.iter().map(|w| format!("{film_id}: {w}")).collect(),
        ..Default::default()
    };
    for (user, assistant) in role_pairs {
        for session in build_sessions(&parsed.lines, film_id, user, assistant, limits) {
            session.validate(limits)?;
            out.samples.extend(split_turns(&session));
            out.sessions.push(session);
        }
    }
    Ok(out)
}
