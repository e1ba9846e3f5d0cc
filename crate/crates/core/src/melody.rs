//! Frame-level melody and its deviation from the base note pitch.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::Seconds;

/// Every note is placed on this MIDI pitch; the melody is carried by the
/// deviation curve.
pub const BASE_PITCH: u8 = 60;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MelodyError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: negative frequency")]
    NegativeFrequency { line: usize },
    #[error("conflicting frames at {time}")]
    ConflictingDuplicate { time: Seconds },
    #[error("frequency must be positive, got {0}")]
    Domain(f64),
    #[error("melody has no voiced frame")]
    EmptyMelody,
    #[error("median window must be odd and positive, got {0}")]
    BadWindow(usize),
    #[error("deviation curve: {0}")]
    InvalidCurve(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchFrame {
    pub time: Seconds,
    /// 0 marks an unvoiced frame.
    pub f0_hz: f64,
}

impl PitchFrame {
    pub fn is_voiced(&self) -> bool {
        self.f0_hz > 0.0
    }
}

/// Parses `time_s,f0_hz` lines; a non-numeric first line is a header.
/// Output is sorted by time with exact duplicates removed.
pub fn parse_contour(text: &str) -> Result<Vec<PitchFrame>, MelodyError> {
    let mut frames = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let row = raw.trim();
        if row.is_empty() {
            continue;
        }
        let Some((t, f)) = row.split_once(',') else {
            return Err(MelodyError::Parse {
                line,
                message: "expected time_s,f0_hz".into(),
            });
        };
        let time = match t.trim().parse::<Seconds>() {
            Ok(time) => time,
            Err(_) if frames.is_empty() && i == first_nonblank(text) => continue,
            Err(e) => {
                return Err(MelodyError::Parse {
                    line,
                    message: e.to_string(),
                })
            }
        };
        if time.is_negative() {
            return Err(MelodyError::Parse {
                line,
                message: "negative time".into(),
            });
        }
        let f0_hz: f64 = f.trim().parse().map_err(|_| MelodyError::Parse {
            line,
            message: format!("bad frequency {:?}", f.trim()),
        })?;
        if !f0_hz.is_finite() {
            return Err(MelodyError::Parse {
                line,
                message: "frequency is not finite".into(),
            });
        }
        if f0_hz < 0.0 {
            return Err(MelodyError::NegativeFrequency { line });
        }
        frames.push(PitchFrame { time, f0_hz });
    }
    frames.sort_by_key(|f| f.time);
    let mut out: Vec<PitchFrame> = Vec::with_capacity(frames.len());
    for f in frames {
        match out.last() {
            Some(prev) if prev.time == f.time => {
                if prev.f0_hz != f.f0_hz {
                    return Err(MelodyError::ConflictingDuplicate { time: f.time });
                }
            }
            _ => out.push(f),
        }
    }
    Ok(out)
}

fn first_nonblank(text: &str) -> usize {
    text.lines().position(|l| !l.trim().is_empty()).unwrap_or(0)
}

/// Writes frames as `time_s,f0_hz` with a header line.
pub fn write_contour(frames: &[PitchFrame]) -> String {
    let mut out = String::from("time_s,f0_hz\n");
    for f in frames {
        out.push_str(&format!("{},{}\n", f.time, f.f0_hz));
    }
    out
}

/// Equal-tempered MIDI pitch, A4 = 440 Hz = 69.
pub fn hz_to_midi(f0_hz: f64) -> Result<f64, MelodyError> {
    if f0_hz > 0.0 && f0_hz.is_finite() {
        Ok(69.0 + 12.0 * (f0_hz / 440.0).log2())
    } else {
        Err(MelodyError::Domain(f0_hz))
    }
}

pub fn midi_to_hz(pitch: f64) -> f64 {
    440.0 * ((pitch - 69.0) / 12.0).exp2()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationPoint {
    pub semitones: f64,
    pub time_s: Seconds,
}

/// Semitone offsets from [`BASE_PITCH`], read as a step function: the value
/// at any time is that of the latest point at or before it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeviationCurve {
    pub points: Vec<DeviationPoint>,
}

impl DeviationCurve {
    pub fn validate(&self) -> Result<(), MelodyError> {
        for (i, p) in self.points.iter().enumerate() {
            if !p.semitones.is_finite() {
                return Err(MelodyError::InvalidCurve(format!(
                    "point {i} is not finite"
                )));
            }
            if i > 0 && self.points[i - 1].time_s >= p.time_s {
                return Err(MelodyError::InvalidCurve(format!(
                    "point {i} is not after point {}",
                    i - 1
                )));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Step-hold lookup. Times before the first point read the first value.
    pub fn value_at(&self, t: Seconds) -> Option<f64> {
        let first = self.points.first()?;
        let idx = self.points.partition_point(|p| p.time_s <= t);
        Some(if idx == 0 {
            first.semitones
        } else {
            self.points[idx - 1].semitones
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ContourOptions {
    /// Odd window for a moving median over voiced frames. Off by default.
    pub median_window: Option<usize>,
}

/// Deviation values are kept to this many decimal places, far below the
/// one-cent export resolution, so serialized curves do not depend on the
/// last bit of the platform's logarithm.
pub const SEMITONE_DECIMALS: i32 = 6;

fn quantize(semitones: f64) -> f64 {
    let scale = 10f64.powi(SEMITONE_DECIMALS);
    (semitones * scale).round() / scale
}

/// Maps every voiced frame to its deviation from the base pitch. Unvoiced
/// frames emit nothing, so the previous voiced value holds across them.
pub fn contour_to_deviation(
    frames: &[PitchFrame],
    options: ContourOptions,
) -> Result<DeviationCurve, MelodyError> {
    let mut points = Vec::new();
    for f in frames.iter().filter(|f| f.is_voiced()) {
        points.push(DeviationPoint {
            time_s: f.time,
            semitones: quantize(hz_to_midi(f.f0_hz)? - f64::from(BASE_PITCH)),
        });
    }
    if points.is_empty() {
        return Err(MelodyError::EmptyMelody);
    }
    if let Some(w) = options.median_window {
        if w == 0 || w % 2 == 0 {
            return Err(MelodyError::BadWindow(w));
        }
        let values: Vec<f64> = points.iter().map(|p| p.semitones).collect();
        for (p, m) in points.iter_mut().zip(moving_median(&values, w)) {
            p.semitones = quantize(m);
        }
    }
    Ok(DeviationCurve { points })
}

/// Centered moving median; the window shrinks symmetrically at the edges.
pub fn moving_median(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..values.len())
        .map(|i| {
            let reach = half.min(i).min(values.len() - 1 - i);
            let mut w = values[i - reach..=i + reach].to_vec();
            w.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
            w[w.len() / 2]
        })
        .collect()
}
