//! Choosing the translation that fits the syllable count, and laying its
//! moras onto the notes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::moraic::{resolve_readings, MoraError, MoraReading, ReadingDictionary, Segmenter};
use crate::timing::SyllableNote;

/// Lyric written on a note that sustains the previous mora's vowel.
pub const CONTINUATION: &str = "+";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("no translation candidates")]
    NoCandidates,
    #[error("target syllable count must be at least 1")]
    ZeroTarget,
    #[error("candidate {index} has a non-finite beam score")]
    NonFiniteScore { index: usize },
    #[error("no candidate could be read: {}", describe(.diagnostics))]
    Unreadable { diagnostics: Vec<Diagnostic> },
    #[error("{moras} moras do not fit on {notes} notes")]
    Overflow { moras: usize, notes: usize },
    #[error("reading has no moras to assign")]
    EmptyReading,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub index: usize,
    pub error: String,
}

fn describe(d: &[Diagnostic]) -> String {
    d.iter()
        .map(|d| format!("#{}: {}", d.index, d.error))
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationCandidate {
    pub text: String,
    /// Higher is better.
    pub beam_score: f64,
    pub reading: Option<MoraReading>,
}

impl TranslationCandidate {
    pub fn new(text: impl Into<String>, beam_score: f64) -> Self {
        TranslationCandidate {
            text: text.into(),
            beam_score,
            reading: None,
        }
    }
}

/// The reading services selection needs: a word segmenter and a kanji
/// reading dictionary.
pub struct Moraics<'a> {
    pub segmenter: &'a mut dyn Segmenter,
    pub dict: &'a ReadingDictionary,
}

impl Moraics<'_> {
    pub fn read(&mut self, text: &str) -> Result<MoraReading, MoraError> {
        resolve_readings(text, self.segmenter, self.dict)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub chosen: TranslationCandidate,
    pub chosen_index: usize,
    pub target_syllables: usize,
    pub mora_count: usize,
    /// target minus moras; negative only when the fallback was used.
    pub deficit: i64,
    pub fallback_used: bool,
    /// Candidates left out because they could not be read.
    pub skipped: Vec<Diagnostic>,
}

/// Index of the winning candidate and whether the fallback rule picked it.
///
/// Candidates with at most `target` moras compete on the smallest shortfall;
/// when there are none, every candidate competes on the smallest overshoot.
/// Either way ties go to the higher score, then the earlier position.
/// `None` entries are excluded.
pub fn select_by_counts(counts: &[Option<(usize, f64)>], target: usize) -> Option<(usize, bool)> {
    let pick = |fits: bool| {
        counts
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.map(|(m, s)| (i, m, s)))
            .filter(|&(_, m, _)| (m <= target) == fits)
            .min_by(|a, b| {
                let gap = |m: usize| m.abs_diff(target);
                gap(a.1)
                    .cmp(&gap(b.1))
                    .then(b.2.total_cmp(&a.2))
                    .then(a.0.cmp(&b.0))
            })
            .map(|(i, _, _)| i)
    };
    pick(true)
        .map(|i| (i, false))
        .or_else(|| pick(false).map(|i| (i, true)))
}

/// Picks the candidate whose mora count best fits `target_syllables`.
/// Candidates without a reading are read through `moraics`.
pub fn select_candidate(
    mut candidates: Vec<TranslationCandidate>,
    target_syllables: usize,
    moraics: &mut Moraics<'_>,
) -> Result<FitResult, FitError> {
    if candidates.is_empty() {
        return Err(FitError::NoCandidates);
    }
    if target_syllables == 0 {
        return Err(FitError::ZeroTarget);
    }
    if let Some(index) = candidates.iter().position(|c| !c.beam_score.is_finite()) {
        return Err(FitError::NonFiniteScore { index });
    }

    let mut skipped = Vec::new();
    let mut counts = Vec::with_capacity(candidates.len());
    for (index, c) in candidates.iter_mut().enumerate() {
        if c.reading.is_none() {
            match moraics.read(&c.text) {
                Ok(r) => c.reading = Some(r),
                Err(e) => skipped.push(Diagnostic {
                    index,
                    error: e.to_string(),
                }),
            }
        }
        match &c.reading {
            Some(r) if r.mora_count() > 0 => counts.push(Some((r.mora_count(), c.beam_score))),
            Some(_) => {
                skipped.push(Diagnostic {
                    index,
                    error: "no singable moras".into(),
                });
                counts.push(None);
            }
            None => counts.push(None),
        }
    }

    let Some((chosen_index, fallback_used)) = select_by_counts(&counts, target_syllables) else {
        return Err(FitError::Unreadable {
            diagnostics: skipped,
        });
    };
    let chosen = candidates.swap_remove(chosen_index);
    let mora_count = chosen.reading.as_ref().map_or(0, MoraReading::mora_count);
    Ok(FitResult {
        chosen,
        chosen_index,
        target_syllables,
        mora_count,
        deficit: target_syllables as i64 - mora_count as i64,
        fallback_used,
        skipped,
    })
}

/// Writes mora `i` on note `i`. Notes left over sustain the previous mora
/// with [`CONTINUATION`]. With `allow_overflow`, moras beyond the last note
/// are joined onto it; otherwise they are an error.
pub fn assign_lyrics(
    notes: &[SyllableNote],
    reading: &MoraReading,
    allow_overflow: bool,
) -> Result<Vec<SyllableNote>, FitError> {
    let moras = &reading.reading;
    if moras.is_empty() && !notes.is_empty() {
        return Err(FitError::EmptyReading);
    }
    if moras.len() > notes.len() && !allow_overflow {
        return Err(FitError::Overflow {
            moras: moras.len(),
            notes: notes.len(),
        });
    }
    let mut out = notes.to_vec();
    for (i, note) in out.iter_mut().enumerate() {
        let lyric = if i + 1 == notes.len() && moras.len() > notes.len() {
            moras[i..].iter().map(|t| t.surface.as_str()).collect()
        } else {
            moras
                .get(i)
                .map_or_else(|| CONTINUATION.to_string(), |t| t.surface.clone())
        };
        note.lyric = Some(lyric);
    }
    Ok(out)
}

/// One lyric line's beam output as exchanged with the translation adapter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateSet {
    pub target_syllables: usize,
    pub candidates: Vec<CandidateRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateRecord {
    pub text: String,
    pub score: f64,
}

impl CandidateSet {
    pub fn into_candidates(self) -> Vec<TranslationCandidate> {
        self.candidates
            .into_iter()
            .map(|c| TranslationCandidate::new(c.text, c.score))
            .collect()
    }
}

/// Serializable summary of a [`FitResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub chosen_index: usize,
    pub text: String,
    pub score: f64,
    pub kana: String,
    pub mora_count: usize,
    pub target_syllables: usize,
    pub deficit: i64,
    pub fallback_used: bool,
    pub skipped: Vec<Diagnostic>,
}

impl From<&FitResult> for FitReport {
    fn from(r: &FitResult) -> Self {
        FitReport {
            chosen_index: r.chosen_index,
            text: r.chosen.text.clone(),
            score: r.chosen.beam_score,
            kana: r
                .chosen
                .reading
                .as_ref()
                .map(MoraReading::kana)
                .unwrap_or_default(),
            mora_count: r.mora_count,
            target_syllables: r.target_syllables,
            deficit: r.deficit,
            fallback_used: r.fallback_used,
            skipped: r.skipped.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moraic::{tokenize_kana, KanjiRunSegmenter};
    use crate::phonology::{parse_phonemes, Syllable};
    use crate::time::Seconds;

    fn kana_candidates(counts: &[usize]) -> Vec<TranslationCandidate> {
        counts
            .iter()
            .map(|&n| TranslationCandidate::new("あ".repeat(n), 0.0))
            .collect()
    }

    fn select(c: Vec<TranslationCandidate>, target: usize) -> Result<FitResult, FitError> {
        let dict = ReadingDictionary::bundled_mini();
        let mut seg = KanjiRunSegmenter;
        select_candidate(
            c,
            target,
            &mut Moraics {
                segmenter: &mut seg,
                dict: &dict,
            },
        )
    }

    fn notes(n: usize) -> Vec<SyllableNote> {
        (0..n)
            .map(|i| SyllableNote {
                onset: Seconds::from_micros(i as i64 * 500_000),
                duration: Seconds::from_micros(400_000),
                syllable: Syllable::new(parse_phonemes("AA1").unwrap()).unwrap(),
                word_index: i,
                lyric: None,
            })
            .collect()
    }

    fn reading(kana: &str) -> MoraReading {
        MoraReading {
            surface: kana.into(),
            reading: tokenize_kana(kana).unwrap(),
        }
    }

    fn lyrics(n: &[SyllableNote]) -> Vec<String> {
        n.iter().map(|x| x.lyric.clone().unwrap()).collect()
    }

    #[test]
    fn exact_fit_wins() {
        let r = select(kana_candidates(&[7, 5, 3]), 5).unwrap();
        assert_eq!((r.chosen_index, r.deficit, r.fallback_used), (1, 0, false));
    }

    #[test]
    fn smallest_shortfall_wins() {
        let r = select(kana_candidates(&[4, 5, 8]), 6).unwrap();
        assert_eq!((r.chosen_index, r.mora_count, r.deficit), (1, 5, 1));
    }

    #[test]
    fn fallback_takes_smallest_overshoot() {
        let r = select(kana_candidates(&[5, 4]), 3).unwrap();
        assert_eq!((r.chosen_index, r.deficit, r.fallback_used), (1, -1, true));
    }

    #[test]
    fn ties_prefer_score_then_position() {
        let mut c = kana_candidates(&[3, 3, 3]);
        c[1].beam_score = 1.0;
        c[2].beam_score = 1.0;
        assert_eq!(select(c, 4).unwrap().chosen_index, 1);
    }

    #[test]
    fn error_cases() {
        assert_eq!(select(vec![], 3).unwrap_err(), FitError::NoCandidates);
        assert_eq!(
            select(kana_candidates(&[2]), 0).unwrap_err(),
            FitError::ZeroTarget
        );
        let mut c = kana_candidates(&[2]);
        c[0].beam_score = f64::NAN;
        assert_eq!(
            select(c, 3).unwrap_err(),
            FitError::NonFiniteScore { index: 0 }
        );
        let err = select(
            vec![
                TranslationCandidate::new("猫", 0.0),
                TranslationCandidate::new("。", 0.0),
            ],
            3,
        )
        .unwrap_err();
        let FitError::Unreadable { diagnostics } = err else {
            panic!()
        };
        assert_eq!(
            diagnostics.iter().map(|d| d.index).collect::<Vec<_>>(),
            [0, 1]
        );
    }

    #[test]
    fn unreadable_candidates_are_skipped() {
        let c = vec![
            TranslationCandidate::new("猫", 5.0),
            TranslationCandidate::new("青空", 0.0),
        ];
        let r = select(c, 4).unwrap();
        assert_eq!(r.chosen_index, 1);
        assert_eq!(r.skipped.len(), 1);
        assert_eq!(r.chosen.reading.unwrap().kana(), "あおぞら");
    }

    #[test]
    fn pads_with_continuations() {
        let out = assign_lyrics(&notes(3), &reading("はな"), false).unwrap();
        assert_eq!(lyrics(&out), ["は", "な", "+"]);
    }

    #[test]
    fn exact_assignment() {
        let out = assign_lyrics(&notes(3), &reading("きょうと"), false).unwrap();
        assert_eq!(lyrics(&out), ["きょ", "う", "と"]);
    }

    #[test]
    fn overflow_needs_permission() {
        assert_eq!(
            assign_lyrics(&notes(2), &reading("はなび"), false).unwrap_err(),
            FitError::Overflow { moras: 3, notes: 2 }
        );
        let out = assign_lyrics(&notes(2), &reading("はなび"), true).unwrap();
        assert_eq!(lyrics(&out), ["は", "なび"]);
    }

    #[test]
    fn empty_reading_rejected() {
        assert_eq!(
            assign_lyrics(&notes(1), &reading(""), false).unwrap_err(),
            FitError::EmptyReading
        );
        assert!(assign_lyrics(&[], &reading(""), false).unwrap().is_empty());
    }

    #[test]
    fn assignment_keeps_timing() {
        let n = notes(4);
        let out = assign_lyrics(&n, &reading("そら"), false).unwrap();
        for (a, b) in n.iter().zip(&out) {
            assert_eq!(
                (a.onset, a.duration, &a.syllable),
                (b.onset, b.duration, &b.syllable)
            );
        }
    }

    #[test]
    fn candidate_set_json() {
        let s: CandidateSet = serde_json::from_str(
            r#"{"target_syllables": 4, "candidates": [{"text": "青空", "score": -0.5}]}"#,
        )
        .unwrap();
        assert_eq!(s.target_syllables, 4);
        assert_eq!(s.into_candidates()[0].beam_score, -0.5);
        assert!(serde_json::from_str::<CandidateSet>(r#"{"target_syllables": 4}"#).is_err());
    }
}
