//! Interchange documents passed between pipeline stages, and the canonical
//! synthesizer project.
//!
//! Every JSON document carries `"schema_version": "1"`. Writers emit keys in
//! sorted order, times as fixed six-decimal strings, UTF-8 and LF line
//! endings, so equal values always serialize to equal bytes.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::CandidateSet;
use crate::melody::{parse_contour, DeviationCurve, BASE_PITCH};
use crate::moraic::ReadingDictionary;
use crate::phonology::{Phoneme, Syllable};
use crate::time::Seconds;
use crate::timing::{parse_timed_labels, NoteSequence, SyllableNote};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InterchangeError {
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("invalid project: {0}")]
    Validation(String),
    #[error("{0}")]
    Format(String),
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> InterchangeError {
    InterchangeError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

/// Deserializes JSON, reporting failures with the offending field path.
pub fn from_json<T: DeserializeOwned>(doc: &str) -> Result<T, InterchangeError> {
    let mut de = serde_json::Deserializer::from_str(doc);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        schema(
            if path.is_empty() { ".".into() } else { path },
            e.into_inner().to_string(),
        )
    })?;
    de.end().map_err(|e| schema(".", e.to_string()))?;
    Ok(value)
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("document types serialize");
    s.push('\n');
    s
}

fn check_version(v: &str) -> Result<(), InterchangeError> {
    if v == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(schema(
            "schema_version",
            format!("unsupported version {v:?}"),
        ))
    }
}

/// A note as written to JSON. Field order is the sorted key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoteRecord {
    pub duration_s: Seconds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lyric: Option<String>,
    pub onset_s: Seconds,
    pub phonemes: Vec<Phoneme>,
    pub word_index: usize,
}

impl From<&SyllableNote> for NoteRecord {
    fn from(n: &SyllableNote) -> Self {
        NoteRecord {
            duration_s: n.duration,
            lyric: n.lyric.clone(),
            onset_s: n.onset,
            phonemes: n.syllable.phonemes().to_vec(),
            word_index: n.word_index,
        }
    }
}

impl NoteRecord {
    fn into_note(self, path: &str) -> Result<SyllableNote, InterchangeError> {
        let syllable = Syllable::new(self.phonemes)
            .map_err(|e| schema(format!("{path}.phonemes"), e.to_string()))?;
        Ok(SyllableNote {
            onset: self.onset_s,
            duration: self.duration_s,
            syllable,
            word_index: self.word_index,
            lyric: self.lyric,
        })
    }
}

fn notes_from_records(
    records: Vec<NoteRecord>,
    field: &str,
) -> Result<Vec<SyllableNote>, InterchangeError> {
    records
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.into_note(&format!("{field}[{i}]")))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    pub source_text: String,
    pub target_text: String,
    pub tool_version: String,
}

/// The final synthesizer-ready payload: lyric notes on the base pitch plus a
/// pitch deviation curve.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthProject {
    pub base_pitch: u8,
    pub notes: Vec<SyllableNote>,
    pub deviation: DeviationCurve,
    pub metadata: Metadata,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProjectDocument {
    base_pitch: u8,
    deviation: DeviationCurve,
    metadata: Metadata,
    notes: Vec<NoteRecord>,
    schema_version: String,
}

impl SynthProject {
    pub fn new(notes: Vec<SyllableNote>, deviation: DeviationCurve, metadata: Metadata) -> Self {
        SynthProject {
            base_pitch: BASE_PITCH,
            notes,
            deviation,
            metadata,
        }
    }

    pub fn validate(&self) -> Result<(), InterchangeError> {
        let bad = |m: String| Err(InterchangeError::Validation(m));
        if self.base_pitch != BASE_PITCH {
            return bad(format!(
                "base pitch must be {BASE_PITCH}, got {}",
                self.base_pitch
            ));
        }
        if self.notes.is_empty() {
            return bad("project has no notes".into());
        }
        for (i, n) in self.notes.iter().enumerate() {
            if n.onset.is_negative() {
                return bad(format!("note {i} starts before zero"));
            }
            if n.duration <= Seconds::ZERO {
                return bad(format!("note {i} has non-positive duration"));
            }
            if n.lyric.as_deref().unwrap_or("").is_empty() {
                return bad(format!("note {i} has no lyric"));
            }
            if i > 0 && self.notes[i - 1].onset > n.onset {
                return bad(format!("note {i} starts before note {}", i - 1));
            }
        }
        self.deviation
            .validate()
            .map_err(|e| InterchangeError::Validation(e.to_string()))
    }
}

/// Canonical project JSON. Fails before producing any output if the project
/// is invalid.
pub fn write_project(project: &SynthProject) -> Result<String, InterchangeError> {
    project.validate()?;
    Ok(to_canonical_json(&ProjectDocument {
        base_pitch: project.base_pitch,
        deviation: project.deviation.clone(),
        metadata: project.metadata.clone(),
        notes: project.notes.iter().map(NoteRecord::from).collect(),
        schema_version: SCHEMA_VERSION.into(),
    }))
}

pub fn parse_project(doc: &str) -> Result<SynthProject, InterchangeError> {
    let d: ProjectDocument = from_json(doc)?;
    check_version(&d.schema_version)?;
    let project = SynthProject {
        base_pitch: d.base_pitch,
        notes: notes_from_records(d.notes, "notes")?,
        deviation: d.deviation,
        metadata: d.metadata,
    };
    project.validate()?;
    Ok(project)
}

/// Notes before lyric assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NotesDocument {
    pub merged_words: Vec<usize>,
    pub notes: Vec<NoteRecord>,
    pub schema_version: String,
}

pub fn write_notes(seq: &NoteSequence) -> String {
    to_canonical_json(&NotesDocument {
        merged_words: seq.merged_words.clone(),
        notes: seq.notes.iter().map(NoteRecord::from).collect(),
        schema_version: SCHEMA_VERSION.into(),
    })
}

pub fn parse_notes(doc: &str) -> Result<NoteSequence, InterchangeError> {
    let d: NotesDocument = from_json(doc)?;
    check_version(&d.schema_version)?;
    Ok(NoteSequence {
        notes: notes_from_records(d.notes, "notes")?,
        merged_words: d.merged_words,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviationDocument {
    pub deviation: DeviationCurve,
    pub schema_version: String,
}

pub fn write_deviation(curve: &DeviationCurve) -> String {
    to_canonical_json(&DeviationDocument {
        deviation: curve.clone(),
        schema_version: SCHEMA_VERSION.into(),
    })
}

pub fn parse_deviation(doc: &str) -> Result<DeviationCurve, InterchangeError> {
    let d: DeviationDocument = from_json(doc)?;
    check_version(&d.schema_version)?;
    d.deviation
        .validate()
        .map_err(|e| schema("deviation", e.to_string()))?;
    Ok(d.deviation)
}

/// One transcribed lyric line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptLine {
    pub end_s: Seconds,
    pub start_s: Seconds,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transcript {
    pub lines: Vec<TranscriptLine>,
    pub schema_version: String,
}

impl Transcript {
    pub fn new(lines: Vec<TranscriptLine>) -> Self {
        Transcript {
            lines,
            schema_version: SCHEMA_VERSION.into(),
        }
    }

    /// Line timings must not run backwards.
    pub fn validate(&self) -> Result<(), InterchangeError> {
        check_version(&self.schema_version)?;
        for (i, l) in self.lines.iter().enumerate() {
            if l.start_s.is_negative() || l.end_s < l.start_s {
                return Err(schema(
                    format!("lines[{i}]"),
                    "end before start or negative time",
                ));
            }
            if i > 0 && l.start_s < self.lines[i - 1].start_s {
                return Err(schema(
                    format!("lines[{i}].start_s"),
                    "lines are not in time order",
                ));
            }
        }
        Ok(())
    }

    /// Global word indices covered by each line, in order.
    pub fn word_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.lines
            .iter()
            .map(|l| {
                let n = l.text.split_whitespace().count();
                let r = start..start + n;
                start += n;
                r
            })
            .collect()
    }

    pub fn words(&self) -> Vec<&str> {
        self.lines
            .iter()
            .flat_map(|l| l.text.split_whitespace())
            .collect()
    }
}

pub fn parse_transcript(doc: &str) -> Result<Transcript, InterchangeError> {
    let t: Transcript = from_json(doc)?;
    t.validate()?;
    Ok(t)
}

pub fn parse_candidates(doc: &str) -> Result<CandidateSet, InterchangeError> {
    let c: CandidateSet = from_json(doc)?;
    if let Some(i) = c.candidates.iter().position(|c| !c.score.is_finite()) {
        return Err(schema(
            format!("candidates[{i}].score"),
            "score is not finite",
        ));
    }
    Ok(c)
}

/// Every interchange format the pipeline reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Transcript,
    Labels,
    Contour,
    Candidates,
    Readings,
    Notes,
    Deviation,
    Project,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "transcript" => Format::Transcript,
            "labels" => Format::Labels,
            "contour" => Format::Contour,
            "candidates" => Format::Candidates,
            "readings" => Format::Readings,
            "notes" => Format::Notes,
            "deviation" => Format::Deviation,
            "project" => Format::Project,
            other => return Err(format!("unknown format {other:?}")),
        })
    }
}

/// Checks that `doc` is a well-formed document of the given format.
pub fn validate(format: Format, doc: &str) -> Result<(), InterchangeError> {
    let fmt = |e: &dyn std::fmt::Display| InterchangeError::Format(e.to_string());
    match format {
        Format::Transcript => parse_transcript(doc).map(drop),
        Format::Labels => parse_timed_labels(doc).map(drop).map_err(|e| fmt(&e)),
        Format::Contour => parse_contour(doc).map(drop).map_err(|e| fmt(&e)),
        Format::Candidates => parse_candidates(doc).map(drop),
        Format::Readings => ReadingDictionary::parse(doc).map(drop).map_err(|e| fmt(&e)),
        Format::Notes => parse_notes(doc).map(drop),
        Format::Deviation => parse_deviation(doc).map(drop),
        Format::Project => parse_project(doc).map(drop),
    }
}
