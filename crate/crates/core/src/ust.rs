//! Export to the plain-text UST note-sequence format read by open singing
//! voice editors.
//!
//! Notes sit on MIDI 60 and the melody travels as a per-note pitch bend in
//! cents, sampled every [`PITCH_STEP_TICKS`] ticks from the step-hold
//! deviation curve. Gaps between notes become rests (lyric `R`).

use thiserror::Error;

use crate::interchange::{InterchangeError, SynthProject};
use crate::time::Seconds;

pub const PITCH_STEP_TICKS: u64 = 5;
pub const REST_LYRIC: &str = "R";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UstError {
    #[error("tempo must be positive and finite, got {0}")]
    Tempo(f64),
    #[error("tick resolution must be positive")]
    Resolution,
    #[error(transparent)]
    Project(#[from] InterchangeError),
    #[error("lyric {0:?} cannot be encoded as Shift-JIS")]
    Unencodable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UstEncoding {
    #[default]
    Utf8,
    ShiftJis,
}

impl std::str::FromStr for UstEncoding {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "utf-8" | "utf8" => Ok(UstEncoding::Utf8),
            "shift-jis" | "shift_jis" | "sjis" => Ok(UstEncoding::ShiftJis),
            other => Err(format!(
                "unknown encoding {other:?}; expected utf-8 or shift-jis"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UstOptions {
    pub tempo_bpm: f64,
    /// Ticks per quarter note.
    pub tick_resolution: u32,
    pub encoding: UstEncoding,
    pub project_name: String,
}

impl Default for UstOptions {
    fn default() -> Self {
        UstOptions {
            tempo_bpm: 120.0,
            tick_resolution: 480,
            encoding: UstEncoding::Utf8,
            project_name: "sv2svt".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UstOutput {
    pub bytes: Vec<u8>,
    /// Notes that were shorter than one tick and were stretched to one.
    pub warnings: Vec<String>,
}

/// Ticks for a span, rounded to the nearest tick (halves away from zero).
pub fn ticks_for(duration: Seconds, tempo_bpm: f64, tick_resolution: u32) -> u64 {
    let t = duration.as_secs_f64() * tempo_bpm / 60.0 * f64::from(tick_resolution);
    t.round().max(0.0) as u64
}

fn seconds_per_tick(options: &UstOptions) -> f64 {
    60.0 / (options.tempo_bpm * f64::from(options.tick_resolution))
}

struct Section {
    length: u64,
    lyric: String,
    bend: Option<Vec<i64>>,
}

pub fn export_ust(project: &SynthProject, options: &UstOptions) -> Result<UstOutput, UstError> {
    if !(options.tempo_bpm > 0.0 && options.tempo_bpm.is_finite()) {
        return Err(UstError::Tempo(options.tempo_bpm));
    }
    if options.tick_resolution == 0 {
        return Err(UstError::Resolution);
    }
    project.validate()?;
    let tick = seconds_per_tick(options);
    let mut warnings = Vec::new();
    let mut sections = Vec::new();
    let mut cursor = Seconds::ZERO;
    for (i, note) in project.notes.iter().enumerate() {
        if note.onset > cursor {
            let rest = ticks_for(
                note.onset - cursor,
                options.tempo_bpm,
                options.tick_resolution,
            );
            if rest > 0 {
                sections.push(Section {
                    length: rest,
                    lyric: REST_LYRIC.into(),
                    bend: None,
                });
            }
        }
        let mut length = ticks_for(note.duration, options.tempo_bpm, options.tick_resolution);
        if length == 0 {
            warnings.push(format!("note {i} is shorter than one tick; clamped to 1"));
            length = 1;
        }
        let bend = (!project.deviation.is_empty()).then(|| {
            let samples = length.div_ceil(PITCH_STEP_TICKS);
            (0..samples)
                .map(|k| {
                    let at = note.onset.as_secs_f64() + (k * PITCH_STEP_TICKS) as f64 * tick;
                    let semis = project
                        .deviation
                        .value_at(Seconds::from_secs_f64(at))
                        .unwrap_or(0.0);
                    (semis * 100.0).round() as i64
                })
                .collect()
        });
        sections.push(Section {
            length,
            lyric: note.lyric.clone().unwrap_or_default(),
            bend,
        });
        cursor = cursor.max(note.end());
    }

    let mut text = String::new();
    let mut line = |s: &str| {
        text.push_str(s);
        text.push_str("\r\n");
    };
    line("[#VERSION]");
    line("UST Version1.2");
    line("[#SETTING]");
    if options.encoding == UstEncoding::Utf8 {
        line("Charset=UTF-8");
    }
    line(&format!("Tempo={:.2}", options.tempo_bpm));
    line("Tracks=1");
    line(&format!("ProjectName={}", options.project_name));
    line("Mode2=False");
    for (n, s) in sections.iter().enumerate() {
        line(&format!("[#{n:04}]"));
        line(&format!("Length={}", s.length));
        line(&format!("Lyric={}", s.lyric));
        line("NoteNum=60");
        if let Some(bend) = &s.bend {
            line("PBType=5");
            line("PBStart=0");
            let cents: Vec<String> = bend.iter().map(i64::to_string).collect();
            line(&format!("PitchBend={}", cents.join(",")));
        }
    }
    line("[#TRACKEND]");

    let bytes = match options.encoding {
        UstEncoding::Utf8 => text.into_bytes(),
        UstEncoding::ShiftJis => {
            let (bytes, _, lossy) = encoding_rs::SHIFT_JIS.encode(&text);
            if lossy {
                let bad = sections
                    .iter()
                    .find(|s| encoding_rs::SHIFT_JIS.encode(&s.lyric).2)
                    .map_or_else(|| options.project_name.clone(), |s| s.lyric.clone());
                return Err(UstError::Unencodable(bad));
            }
            bytes.into_owned()
        }
    };
    Ok(UstOutput { bytes, warnings })
}
