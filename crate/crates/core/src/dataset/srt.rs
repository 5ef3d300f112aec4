//! Speaker-attributed SRT parsing.
//!
//! Each cue's first text line carries the speaker as `SPEAKER: utterance`.
//! A sidecar map `{cue index: speaker}` overrides that convention for the
//! listed cues, in which case the whole cue text is the utterance.

use super::SubtitleLine;
use crate::error::{Error, Result};
use regex::Regex;
use std::collections::HashMap;
use std::sync::LazyLock;

static TIMESTAMP_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(\d+):(\d{2}):(\d{2})[,.](\d{3})$").unwrap());

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SrtParse {
    pub lines: Vec<SubtitleLine>,
    /// One message per skipped cue.
    pub warnings: Vec<String>,
}

/// `HH:MM:SS,mmm` to milliseconds.
pub fn parse_timestamp(ts: &str) -> Result<u64> {
    let caps =
        TIMESTAMP_RE.captures(ts.trim()).ok_or_else(|| Error::Subtitle(format!("malformed timestamp {ts:?}")))?;
    let field = |i: usize| caps[i].parse::<u64>().map_err(|e| Error::Subtitle(format!("{ts:?}: {e}")));
    let (h, m, s, ms) = (field(1)?, field(2)?, field(3)?, field(4)?);
    if m >= 60 || s >= 60 {
        return Err(Error::Subtitle(format!("malformed timestamp {ts:?}")));
    }
    Ok(((h * 60 + m) * 60 + s) * 1000 + ms)
}

fn parse_timing(line: &str) -> Result<(u64, u64)> {
    let (a, b) =
        line.split_once("-->").ok_or_else(|| Error::Subtitle(format!("missing '-->' in timing line {line:?}")))?;
    // trailing cue settings (e.g. positions) follow the end time
    let b = b.split_whitespace().next().unwrap_or("");
    Ok((parse_timestamp(a)?, parse_timestamp(b)?))
}

pub fn parse_srt(content: &str) -> Result<SrtParse> {
    parse_srt_with_speakers(content, &HashMap::new())
}

pub fn parse_srt_with_speakers(content: &str, speakers: &HashMap<usize, String>) -> Result<SrtParse> {
    let content = content.trim_start_matches('\u{feff}').replace("\r\n", "\n");
    let mut out = SrtParse::default();
    let mut block: Vec<&str> = Vec::new();
    let mut ordinal = 0usize;
    for line in content.split('\n').chain(std::iter::once("")) {
        if !line.trim().is_empty() {
            block.push(line);
            continue;
        }
        if block.is_empty() {
            continue;
        }
        ordinal += 1;
        parse_cue(&block, ordinal, speakers, &mut out)?;
        block.clear();
    }
    Ok(out)
}

fn parse_cue(block: &[&str], ordinal: usize, speakers: &HashMap<usize, String>, out: &mut SrtParse) -> Result<()> {
    let (index, rest) = if block[0].contains("-->") {
        (ordinal, block)
    } else {
        let idx =
            block[0].trim().parse::<usize>().map_err(|_| Error::Subtitle(format!("bad cue index {:?}", block[0])))?;
        (idx, &block[1..])
    };
    let Some((timing, text_lines)) = rest.split_first() else {
        return Err(Error::Subtitle(format!("cue {index} has no timing line")));
    };
    let (start_ms, end_ms) = parse_timing(timing)?;
    if end_ms <= start_ms {
        out.warnings.push(format!("cue {index}: end time not after start time"));
        return Ok(());
    }
    let text_lines: Vec<&str> = text_lines.iter().map(|l| l.trim()).collect();

    let (speaker, text) = match speakers.get(&index) {
        Some(sp) => (sp.trim().to_string(), text_lines.join(" ")),
        None => {
            let Some((first, more)) = text_lines.split_first() else {
                out.warnings.push(format!("cue {index}: no text"));
                return Ok(());
            };
            let Some((sp, utterance)) = first.split_once(':') else {
                out.warnings.push(format!("cue {index}: missing speaker prefix"));
                return Ok(());
            };
            let mut text = utterance.trim().to_string();
            for l in more {
                text.push(' ');
                text.push_str(l);
            }
            (sp.trim().to_string(), text)
        }
    };
    let text = text.trim().to_string();
    if speaker.is_empty() || text.is_empty() {
        out.warnings.push(format!("cue {index}: empty speaker or text"));
        return Ok(());
    }
    out.lines.push(SubtitleLine { index, start_ms, end_ms, speaker, text });
    Ok(())
}
