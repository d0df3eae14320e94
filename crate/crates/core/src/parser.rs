//! Parser for free-form model generations.
//!
//! A generation is a sequence of frame segments separated by `#frameid` and
//! terminated by `#sgend`. Each non-blank line of a segment is either a
//! relation line, `(s, p, o)` or `(s, action, spatial, o)` with an optional
//! list index in front, or noise. Noise is counted, never fatal.

use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{normalize_label, FrameGraph, PredicateSplit, ScoredTriplet, Triplet};

pub const FRAME_SEPARATOR: &str = "#frameid";
pub const END_SENTINEL: &str = "#sgend";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationFormat {
    Triplet,
    Quadruplet,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    /// Frames that received at least one triplet.
    pub frames_found: usize,
    pub triplets_parsed: usize,
    pub lines_rejected: usize,
    pub duplicates_dropped: usize,
    /// No end sentinel before the end of input.
    pub truncated: bool,
}

static RELATION_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:\d+\s*[.):]\s*|\d+\s+)?\(([^(),]*),([^(),]*),([^(),]*)(?:,([^(),]*))?\)$")
        .expect("relation grammar compiles")
});

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Byte offsets of `token` occurrences that sit on token boundaries.
fn token_positions<'a>(text: &'a str, token: &'a str) -> impl Iterator<Item = usize> + 'a {
    text.match_indices(token).filter_map(move |(i, _)| {
        let before = text[..i].chars().next_back();
        let after = text[i + token.len()..].chars().next();
        let bounded = !before.is_some_and(is_word_char) && !after.is_some_and(is_word_char);
        bounded.then_some(i)
    })
}

fn split_segments(body: &str) -> Vec<&str> {
    let mut segments = Vec::new();
    let mut start = 0;
    for pos in token_positions(body, FRAME_SEPARATOR) {
        segments.push(&body[start..pos]);
        start = pos + FRAME_SEPARATOR.len();
    }
    segments.push(&body[start..]);
    segments
}

/// Parse one relation line; `None` if it does not match the grammar.
pub fn parse_line(line: &str, format: RelationFormat) -> Option<Triplet> {
    let caps = RELATION_LINE.captures(line.trim())?;
    let field = |i: usize| caps.get(i).map(|m| m.as_str());
    match (format, field(4)) {
        (RelationFormat::Triplet, None) => Triplet::new(field(1)?, field(2)?, field(3)?).ok(),
        (RelationFormat::Quadruplet, Some(object)) => {
            let predicate = [field(2)?, field(3)?]
                .iter()
                .map(|p| normalize_label(p))
                .filter(|p| !p.is_empty())
                .collect::<Vec<_>>()
                .join(" ");
            Triplet::new(field(1)?, &predicate, object).ok()
        }
        _ => None,
    }
}

/// Split a generation into one frame graph per entry of `frame_ids`.
///
/// Never fails. Segments past the last frame id are discarded and their
/// lines counted as rejected; missing segments yield empty frames.
pub fn parse_generation(text: &str, format: RelationFormat, frame_ids: &[String]) -> (Vec<FrameGraph>, ParseReport) {
    let mut report = ParseReport::default();
    let body = match token_positions(text, END_SENTINEL).next() {
        Some(end) => &text[..end],
        None => {
            report.truncated = true;
            text
        }
    };

    let mut frames: Vec<FrameGraph> = frame_ids.iter().map(FrameGraph::empty).collect();
    for (i, segment) in split_segments(body).into_iter().enumerate() {
        let lines = segment.lines().map(str::trim).filter(|l| !l.is_empty());
        let Some(frame) = frames.get_mut(i) else {
            report.lines_rejected += lines.count();
            continue;
        };
        let mut seen = HashSet::new();
        for line in lines {
            match parse_line(line, format) {
                Some(t) if seen.contains(&t) => report.duplicates_dropped += 1,
                Some(t) => {
                    seen.insert(t.clone());
                    frame.triplets.push(ScoredTriplet::unboxed(t, 0));
                }
                None => report.lines_rejected += 1,
            }
        }
        frame.renumber();
        report.triplets_parsed += frame.len();
        if !frame.is_empty() {
            report.frames_found += 1;
        }
    }
    (frames, report)
}

/// Inverse of [`parse_generation`]. Quadruplet output needs a predicate
/// split to recover the action and spatial parts.
pub fn serialize_frames(frames: &[FrameGraph], format: RelationFormat, split: Option<&PredicateSplit>) -> Result<String> {
    let mut segments = Vec::with_capacity(frames.len());
    for frame in frames {
        let mut lines = Vec::with_capacity(frame.len());
        for st in &frame.triplets {
            let t = &st.triplet;
            let line = match format {
                RelationFormat::Triplet => format!("({}, {}, {})", t.subject(), t.predicate(), t.object()),
                RelationFormat::Quadruplet => {
                    let (action, spatial) = split.and_then(|s| s.split(t.predicate())).ok_or_else(|| {
                        Error::Config(format!(
                            "predicate {:?} has no action/spatial split; quadruplet output needs a tagged vocabulary",
                            t.predicate()
                        ))
                    })?;
                    format!("({}, {}, {}, {})", t.subject(), action, spatial, t.object())
                }
            };
            lines.push(line);
        }
        segments.push(lines.join("\n"));
    }
    Ok(format!("{}\n{}", segments.join(&format!("\n{FRAME_SEPARATOR}\n")), END_SENTINEL))
}
