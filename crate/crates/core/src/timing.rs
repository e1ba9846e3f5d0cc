//! Timed phoneme labels and syllable-level note events.
//!
//! A note starts where the first phoneme of its syllable starts and lasts
//! until the last phoneme of that syllable ends. Silence between phonemes of
//! one syllable is part of the note; silence between syllables is a rest.

use std::fmt::Write as _;

use thiserror::Error;

use crate::phonology::{syllabify, Phoneme, Syllable};
use crate::time::Seconds;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimingError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: negative time")]
    NegativeTime { line: usize },
    #[error("line {line}: rows are not in time order")]
    NonMonotonic { line: usize },
    #[error("phonemes of word {word_index} do not match its pronunciation (aligned {aligned}, expected {expected})")]
    Mismatch {
        word_index: usize,
        aligned: String,
        expected: String,
    },
    #[error("no syllabification given for word {word_index}")]
    MissingWord { word_index: usize },
    #[error("word {word_index} has no vowel and no neighbouring word to attach to")]
    Unattached { word_index: usize },
}

pub const SILENCE_LABEL: &str = "SIL";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimedPhoneme {
    pub phoneme: Phoneme,
    pub start: Seconds,
    pub end: Seconds,
    pub word_index: usize,
}

/// A `SIL` row from the aligner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gap {
    pub start: Seconds,
    pub end: Seconds,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TimedLabels {
    pub phonemes: Vec<TimedPhoneme>,
    pub gaps: Vec<Gap>,
}

/// Parses `start<TAB>end<TAB>phoneme<TAB>word_index` rows.
///
/// Rows must be sorted by start time, and phonemes of one word may not
/// overlap. Word indices of phoneme rows never decrease.
pub fn parse_timed_labels(text: &str) -> Result<TimedLabels, TimingError> {
    let mut labels = TimedLabels::default();
    let mut last_start = Seconds::ZERO;
    let mut last_in_word: Option<(usize, Seconds)> = None;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let row = raw.trim_end_matches('\r');
        if row.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split('\t').collect();
        if fields.len() != 4 {
            return Err(TimingError::Parse {
                line,
                message: format!("expected 4 tab-separated fields, found {}", fields.len()),
            });
        }
        let time = |s: &str| {
            s.parse::<Seconds>().map_err(|e| TimingError::Parse {
                line,
                message: e.to_string(),
            })
        };
        let start = time(fields[0])?;
        let end = time(fields[1])?;
        if start.is_negative() || end.is_negative() {
            return Err(TimingError::NegativeTime { line });
        }
        if end <= start {
            return Err(TimingError::Parse {
                line,
                message: "end is not after start".into(),
            });
        }
        if start < last_start {
            return Err(TimingError::NonMonotonic { line });
        }
        last_start = start;

        let label = fields[2].trim();
        if label == SILENCE_LABEL {
            labels.gaps.push(Gap { start, end });
            continue;
        }
        let phoneme = Phoneme::parse_label(label).map_err(|e| TimingError::Parse {
            line,
            message: e.to_string(),
        })?;
        let word_index: usize = fields[3].trim().parse().map_err(|_| TimingError::Parse {
            line,
            message: format!("bad word index {:?}", fields[3]),
        })?;
        match last_in_word {
            Some((w, _)) if word_index < w => return Err(TimingError::NonMonotonic { line }),
            Some((w, prev_end)) if word_index == w && start < prev_end => {
                return Err(TimingError::NonMonotonic { line })
            }
            _ => {}
        }
        last_in_word = Some((word_index, end));
        labels.phonemes.push(TimedPhoneme {
            phoneme,
            start,
            end,
            word_index,
        });
    }
    Ok(labels)
}

/// Writes labels in time order, silence rows with word index -1.
pub fn write_timed_labels(labels: &TimedLabels) -> String {
    enum Row<'a> {
        Ph(&'a TimedPhoneme),
        Sil(&'a Gap),
    }
    let mut rows: Vec<(Seconds, Row)> = labels
        .phonemes
        .iter()
        .map(|p| (p.start, Row::Ph(p)))
        .chain(labels.gaps.iter().map(|g| (g.start, Row::Sil(g))))
        .collect();
    rows.sort_by_key(|(t, r)| (*t, matches!(r, Row::Ph(_))));
    let mut out = String::new();
    for (_, row) in rows {
        match row {
            Row::Ph(p) => writeln!(
                out,
                "{}\t{}\t{}\t{}",
                p.start, p.end, p.phoneme, p.word_index
            )
            .unwrap(),
            Row::Sil(g) => writeln!(out, "{}\t{}\t{SILENCE_LABEL}\t-1", g.start, g.end).unwrap(),
        }
    }
    out
}

/// A sung note covering one syllable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyllableNote {
    pub onset: Seconds,
    pub duration: Seconds,
    pub syllable: Syllable,
    pub word_index: usize,
    pub lyric: Option<String>,
}

impl SyllableNote {
    pub fn end(&self) -> Seconds {
        self.onset + self.duration
    }
}

/// How one word breaks into syllables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WordSyllables {
    Syllables(Vec<Syllable>),
    /// A token with no vowel, such as `HH M`.
    Vowelless(Vec<Phoneme>),
}

impl WordSyllables {
    pub fn from_phonemes(phonemes: &[Phoneme]) -> WordSyllables {
        match syllabify(phonemes) {
            Ok(s) => WordSyllables::Syllables(s),
            Err(_) => WordSyllables::Vowelless(phonemes.to_vec()),
        }
    }

    fn flattened(&self) -> Vec<Phoneme> {
        match self {
            WordSyllables::Syllables(s) => s
                .iter()
                .flat_map(|x| x.phonemes().iter().copied())
                .collect(),
            WordSyllables::Vowelless(p) => p.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NoteSequence {
    pub notes: Vec<SyllableNote>,
    /// Vowel-less words that were folded into a neighbouring note.
    pub merged_words: Vec<usize>,
}

/// Builds one note per syllable from aligned phonemes.
///
/// `words[i]` is the syllabification of word `i`; every word that appears
/// in `timed` must have one, and its phonemes must equal the aligned ones
/// (stress ignored). Vowel-less words are folded into the first note of the
/// following word, or the last note of the preceding word if none follows.
pub fn build_notes(
    timed: &[TimedPhoneme],
    words: &[WordSyllables],
) -> Result<NoteSequence, TimingError> {
    struct Pending {
        word_index: usize,
        phonemes: Vec<Phoneme>,
        start: Seconds,
    }

    let mut out = NoteSequence::default();
    let mut pending: Option<Pending> = None;

    for group in timed.chunk_by(|a, b| a.word_index == b.word_index) {
        let word_index = group[0].word_index;
        let syl = words
            .get(word_index)
            .ok_or(TimingError::MissingWord { word_index })?;
        let expected = syl.flattened();
        let same = expected.len() == group.len()
            && expected
                .iter()
                .zip(group)
                .all(|(e, t)| e.symbol() == t.phoneme.symbol());
        if !same {
            return Err(TimingError::Mismatch {
                word_index,
                aligned: join_symbols(group.iter().map(|t| t.phoneme)),
                expected: join_symbols(expected.iter().copied()),
            });
        }

        let syllables = match syl {
            WordSyllables::Syllables(s) => s,
            WordSyllables::Vowelless(p) => {
                if let Some(prev) = pending.take() {
                    // Two vowel-less words in a row travel together.
                    let mut phonemes = prev.phonemes;
                    phonemes.extend_from_slice(p);
                    out.merged_words.push(word_index);
                    pending = Some(Pending { phonemes, ..prev });
                } else {
                    out.merged_words.push(word_index);
                    pending = Some(Pending {
                        word_index,
                        phonemes: p.clone(),
                        start: group[0].start,
                    });
                }
                continue;
            }
        };

        let mut cursor = 0;
        for (k, s) in syllables.iter().enumerate() {
            let span = &group[cursor..cursor + s.phonemes().len()];
            cursor += span.len();
            let mut syllable = s.clone();
            let mut onset = span[0].start;
            let end = span[span.len() - 1].end;
            if k == 0 {
                if let Some(p) = pending.take() {
                    syllable.prepend(&p.phonemes);
                    onset = p.start;
                }
            }
            out.notes.push(SyllableNote {
                onset,
                duration: end - onset,
                syllable,
                word_index,
                lyric: None,
            });
        }
    }

    if let Some(p) = pending {
        let last = out.notes.last_mut().ok_or(TimingError::Unattached {
            word_index: p.word_index,
        })?;
        let tail_end = timed.last().expect("pending implies timed rows").end;
        last.syllable.append(&p.phonemes);
        last.duration = tail_end - last.onset;
    }
    Ok(out)
}

/// Preferred path: syllabify the aligner's phonemes directly.
pub fn notes_from_alignment(timed: &[TimedPhoneme]) -> Result<NoteSequence, TimingError> {
    let max_word = timed.iter().map(|t| t.word_index).max();
    let mut words = vec![WordSyllables::Vowelless(Vec::new()); max_word.map_or(0, |m| m + 1)];
    for group in timed.chunk_by(|a, b| a.word_index == b.word_index) {
        let phonemes: Vec<Phoneme> = group.iter().map(|t| t.phoneme).collect();
        words[group[0].word_index] = WordSyllables::from_phonemes(&phonemes);
    }
    build_notes(timed, &words)
}

fn join_symbols(it: impl Iterator<Item = Phoneme>) -> String {
    it.map(|p| p.symbol().as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phonology::parse_phonemes;

    fn s(x: &str) -> Seconds {
        x.parse().unwrap()
    }

    fn timed(word_index: usize, spec: &[(&str, &str, &str)]) -> Vec<TimedPhoneme> {
        spec.iter()
            .map(|(p, a, b)| TimedPhoneme {
                phoneme: p.parse().unwrap(),
                start: s(a),
                end: s(b),
                word_index,
            })
            .collect()
    }

    fn blueberry() -> Vec<TimedPhoneme> {
        timed(
            0,
            &[
                ("B", "0.10", "0.18"),
                ("L", "0.18", "0.25"),
                ("UW1", "0.25", "0.60"),
                ("B", "0.60", "0.66"),
                ("EH2", "0.66", "0.90"),
                ("R", "0.90", "0.98"),
                ("IY0", "0.98", "1.30"),
            ],
        )
    }

    fn spans(notes: &NoteSequence) -> Vec<(String, String)> {
        notes
            .notes
            .iter()
            .map(|n| (n.onset.to_string(), n.duration.to_string()))
            .collect()
    }

    #[test]
    fn parses_one_row() {
        let l = parse_timed_labels("0.10\t0.18\tB\t0\n").unwrap();
        assert_eq!(l.phonemes.len(), 1);
        assert_eq!(l.phonemes[0].start, s("0.1"));
        assert_eq!(l.phonemes[0].end, s("0.18"));
        assert_eq!(l.phonemes[0].word_index, 0);
    }

    #[test]
    fn silence_becomes_gap() {
        let l = parse_timed_labels("0.00\t0.10\tSIL\t-1\n").unwrap();
        assert!(l.phonemes.is_empty());
        assert_eq!(
            l.gaps,
            vec![Gap {
                start: s("0"),
                end: s("0.1")
            }]
        );
    }

    #[test]
    fn shuffled_rows_rejected() {
        let err = parse_timed_labels("0.10\t0.18\tB\t0\n0.00\t0.10\tL\t0\n").unwrap_err();
        assert_eq!(err, TimingError::NonMonotonic { line: 2 });
        let err = parse_timed_labels("0.10\t0.18\tB\t1\n0.20\t0.30\tL\t0\n").unwrap_err();
        assert_eq!(err, TimingError::NonMonotonic { line: 2 });
        let err = parse_timed_labels("0.10\t0.18\tB\t0\n0.15\t0.30\tL\t0\n").unwrap_err();
        assert_eq!(err, TimingError::NonMonotonic { line: 2 });
    }

    #[test]
    fn bad_rows_rejected() {
        assert_eq!(
            parse_timed_labels("-0.10\t0.18\tB\t0").unwrap_err(),
            TimingError::NegativeTime { line: 1 }
        );
        assert!(matches!(
            parse_timed_labels("0.10\t0.10\tB\t0").unwrap_err(),
            TimingError::Parse { line: 1, .. }
        ));
        assert!(matches!(
            parse_timed_labels("0.10 0.18 B 0").unwrap_err(),
            TimingError::Parse { line: 1, .. }
        ));
        assert!(matches!(
            parse_timed_labels("0.10\t0.18\tXX\t0").unwrap_err(),
            TimingError::Parse { line: 1, .. }
        ));
        assert!(matches!(
            parse_timed_labels("0.1234567\t0.18\tB\t0").unwrap_err(),
            TimingError::Parse { line: 1, .. }
        ));
    }

    #[test]
    fn labels_round_trip() {
        let text =
            "0.000000\t0.100000\tSIL\t-1\n0.100000\t0.180000\tB\t0\n0.180000\t0.250000\tL\t0\n";
        assert_eq!(write_timed_labels(&parse_timed_labels(text).unwrap()), text);
    }

    #[test]
    fn blueberry_notes() {
        let t = blueberry();
        let words = [WordSyllables::from_phonemes(
            &parse_phonemes("B L UW1 B EH2 R IY0").unwrap(),
        )];
        let notes = build_notes(&t, &words).unwrap();
        assert_eq!(
            spans(&notes),
            [
                ("0.100000".into(), "0.500000".into()),
                ("0.600000".into(), "0.300000".into()),
                ("0.900000".into(), "0.400000".into()),
            ]
        );
        assert_eq!(notes, notes_from_alignment(&t).unwrap());
    }

    #[test]
    fn single_syllable_word() {
        let t = timed(
            0,
            &[
                ("K", "0", "0.1"),
                ("AE1", "0.1", "0.3"),
                ("T", "0.3", "0.4"),
            ],
        );
        let notes = notes_from_alignment(&t).unwrap();
        assert_eq!(spans(&notes), [("0.000000".into(), "0.400000".into())]);
    }

    #[test]
    fn gap_inside_syllable_is_absorbed() {
        let t = timed(
            0,
            &[
                ("K", "0", "0.1"),
                ("AE1", "0.2", "0.3"),
                ("T", "0.5", "0.6"),
            ],
        );
        let notes = notes_from_alignment(&t).unwrap();
        assert_eq!(spans(&notes), [("0.000000".into(), "0.600000".into())]);
    }

    #[test]
    fn mismatch_names_the_word() {
        let t = blueberry();
        let words = [WordSyllables::from_phonemes(
            &parse_phonemes("B L UW1 B EH2 R IY0 Z").unwrap(),
        )];
        let err = build_notes(&t, &words).unwrap_err();
        assert!(matches!(err, TimingError::Mismatch { word_index: 0, .. }));
        assert_eq!(
            build_notes(&t, &[]).unwrap_err(),
            TimingError::MissingWord { word_index: 0 }
        );
    }

    #[test]
    fn stress_is_ignored_for_matching() {
        let t = blueberry();
        let words = [WordSyllables::from_phonemes(
            &parse_phonemes("B L UW0 B EH1 R IY1").unwrap(),
        )];
        assert_eq!(build_notes(&t, &words).unwrap().notes.len(), 3);
    }

    #[test]
    fn vowelless_word_joins_following_word() {
        let mut t = timed(0, &[("HH", "0.0", "0.1"), ("M", "0.1", "0.2")]);
        t.extend(timed(
            1,
            &[
                ("K", "0.3", "0.4"),
                ("AE1", "0.4", "0.6"),
                ("T", "0.6", "0.7"),
            ],
        ));
        let notes = notes_from_alignment(&t).unwrap();
        assert_eq!(notes.merged_words, [0]);
        assert_eq!(spans(&notes), [("0.000000".into(), "0.700000".into())]);
        assert_eq!(notes.notes[0].syllable.to_string(), "HHMKAET");
        assert_eq!(notes.notes[0].word_index, 1);
    }

    #[test]
    fn trailing_vowelless_word_joins_preceding_word() {
        let mut t = timed(
            0,
            &[
                ("K", "0.0", "0.1"),
                ("AE1", "0.1", "0.3"),
                ("T", "0.3", "0.4"),
            ],
        );
        t.extend(timed(1, &[("SH", "0.5", "0.9")]));
        let notes = notes_from_alignment(&t).unwrap();
        assert_eq!(notes.merged_words, [1]);
        assert_eq!(spans(&notes), [("0.000000".into(), "0.900000".into())]);
        assert_eq!(notes.notes[0].syllable.to_string(), "KAETSH");
    }

    #[test]
    fn lone_vowelless_word_is_an_error() {
        let t = timed(0, &[("SH", "0.5", "0.9")]);
        assert_eq!(
            notes_from_alignment(&t).unwrap_err(),
            TimingError::Unattached { word_index: 0 }
        );
    }
}
