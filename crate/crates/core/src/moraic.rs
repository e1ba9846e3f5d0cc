//! Japanese mora tokenization and kanji reading resolution.
//!
//! Each mora is one token: a plain kana, a kana plus small ゃゅょ (yoon),
//! the sokuon っ, the long-vowel mark ー, or the moraic ん. Katakana follow
//! the same rules. Small vowel kana (ぁぃぅぇぉゎ) also fuse with the kana
//! before them, as in ファ or ティ.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MoraError {
    #[error("character {ch:?} at position {position} is not kana")]
    NotKana { ch: char, position: usize },
    #[error("small kana {ch:?} at position {position} has no kana to attach to")]
    DanglingSmallKana { ch: char, position: usize },
    #[error("no reading for {}", .words.join(", "))]
    UnknownReading { words: Vec<String> },
    #[error("segmenter failed: {0}")]
    Segmenter(String),
    #[error("segmentation {words:?} does not cover {text:?}")]
    NotPartition { text: String, words: Vec<String> },
    #[error("reading dictionary line {line}: {message}")]
    Dictionary { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KanaKind {
    Plain,
    Yoon,
    Sokuon,
    Choon,
    MoraicN,
}

/// One mora of kana text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KanaToken {
    pub surface: String,
    pub kind: KanaKind,
}

fn is_hiragana(c: char) -> bool {
    matches!(c, '\u{3041}'..='\u{3096}' | '\u{309D}' | '\u{309E}')
}

fn is_katakana(c: char) -> bool {
    matches!(c, '\u{30A1}'..='\u{30FA}' | '\u{30FC}'..='\u{30FE}')
}

pub fn is_kana(c: char) -> bool {
    is_hiragana(c) || is_katakana(c)
}

/// CJK ideographs plus the repetition mark 々.
pub fn is_kanji(c: char) -> bool {
    matches!(c,
        '\u{4E00}'..='\u{9FFF}'
        | '\u{3400}'..='\u{4DBF}'
        | '\u{F900}'..='\u{FAFF}'
        | '\u{20000}'..='\u{2FA1F}'
        | '\u{3005}')
}

fn is_yoon_mark(c: char) -> bool {
    matches!(c, 'ゃ' | 'ゅ' | 'ょ' | 'ャ' | 'ュ' | 'ョ')
}

fn is_small_vowel(c: char) -> bool {
    matches!(
        c,
        'ぁ' | 'ぃ' | 'ぅ' | 'ぇ' | 'ぉ' | 'ゎ' | 'ァ' | 'ィ' | 'ゥ' | 'ェ' | 'ォ' | 'ヮ'
    )
}

fn is_space(c: char) -> bool {
    c.is_whitespace()
}

/// Punctuation and symbols that are never sung.
pub fn is_ignorable(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(c,
            '\u{3001}'..='\u{3003}'
            | '\u{3008}'..='\u{3011}'
            | '\u{3014}'..='\u{301F}'
            | '\u{30FB}'
            | '\u{FF01}'..='\u{FF0F}'
            | '\u{FF1A}'..='\u{FF20}'
            | '\u{FF3B}'..='\u{FF40}'
            | '\u{FF5B}'..='\u{FF65}'
            | '\u{2010}'..='\u{2027}'
            | '♪' | '♫')
}

/// Splits pure kana into moras. Whitespace is skipped.
pub fn tokenize_kana(text: &str) -> Result<Vec<KanaToken>, MoraError> {
    let normalized: String = text.nfc().collect();
    let mut tokens: Vec<KanaToken> = Vec::new();
    for (position, c) in normalized.chars().enumerate() {
        if is_space(c) {
            continue;
        }
        if !is_kana(c) {
            return Err(MoraError::NotKana { ch: c, position });
        }
        if is_yoon_mark(c) || is_small_vowel(c) {
            let base = tokens
                .last_mut()
                .filter(|t| t.kind == KanaKind::Plain && t.surface.chars().count() == 1)
                .ok_or(MoraError::DanglingSmallKana { ch: c, position })?;
            base.surface.push(c);
            if is_yoon_mark(c) {
                base.kind = KanaKind::Yoon;
            }
            continue;
        }
        let kind = match c {
            'っ' | 'ッ' => KanaKind::Sokuon,
            'ー' => KanaKind::Choon,
            'ん' | 'ン' => KanaKind::MoraicN,
            _ => KanaKind::Plain,
        };
        tokens.push(KanaToken {
            surface: c.to_string(),
            kind,
        });
    }
    Ok(tokens)
}

/// Text with its kana reading split into moras.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoraReading {
    pub surface: String,
    pub reading: Vec<KanaToken>,
}

impl MoraReading {
    pub fn mora_count(&self) -> usize {
        self.reading.len()
    }

    /// The reading as one kana string.
    pub fn kana(&self) -> String {
        self.reading.iter().map(|t| t.surface.as_str()).collect()
    }
}

/// Kanji words and their kana readings, first reading being the default.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReadingDictionary {
    entries: HashMap<String, Vec<String>>,
}

const BUNDLED_MINI: &str = include_str!("../data/readings-mini.tsv");

impl ReadingDictionary {
    /// Parses `surface<TAB>reading1<TAB>reading2...` lines. `#` starts a comment line.
    pub fn parse(text: &str) -> Result<ReadingDictionary, MoraError> {
        let mut entries: HashMap<String, Vec<String>> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let row = raw.trim_end_matches('\r');
            if row.trim().is_empty() || row.starts_with('#') {
                continue;
            }
            let mut fields = row.split('\t');
            let surface: String = fields.next().unwrap_or_default().trim().nfc().collect();
            let readings: Vec<String> = fields
                .map(|r| r.trim().nfc().collect::<String>())
                .filter(|r| !r.is_empty())
                .collect();
            if surface.is_empty() || readings.is_empty() {
                return Err(MoraError::Dictionary {
                    line,
                    message: "needs a surface and a reading".into(),
                });
            }
            if let Some(r) = readings.iter().find(|r| !r.chars().all(is_kana)) {
                return Err(MoraError::Dictionary {
                    line,
                    message: format!("reading {r:?} is not pure kana"),
                });
            }
            let slot = entries.entry(surface).or_default();
            for r in readings {
                if !slot.contains(&r) {
                    slot.push(r);
                }
            }
        }
        Ok(ReadingDictionary { entries })
    }

    /// A small dictionary shipped with the crate, enough for tests and demos.
    pub fn bundled_mini() -> ReadingDictionary {
        ReadingDictionary::parse(BUNDLED_MINI).expect("bundled dictionary is valid")
    }

    pub fn insert(&mut self, surface: &str, readings: Vec<String>) {
        self.entries.insert(surface.nfc().collect(), readings);
    }

    /// Adds entries from `other` for surfaces not already present.
    pub fn extend_missing(&mut self, other: &ReadingDictionary) {
        for (k, v) in &other.entries {
            self.entries.entry(k.clone()).or_insert_with(|| v.clone());
        }
    }

    pub fn readings(&self, surface: &str) -> Option<&[String]> {
        self.entries.get(surface).map(Vec::as_slice)
    }

    pub fn default_reading(&self, surface: &str) -> Option<&str> {
        self.readings(surface)
            .and_then(|r| r.first())
            .map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sorted TSV text.
    pub fn to_tsv(&self) -> String {
        let mut keys: Vec<&String> = self.entries.keys().collect();
        keys.sort();
        let mut out = String::new();
        for k in keys {
            out.push_str(k);
            for r in &self.entries[k] {
                out.push('\t');
                out.push_str(r);
            }
            out.push('\n');
        }
        out
    }
}

/// Splits a sentence into words.
///
/// Implementations need not be reentrant; callers hold one per thread.
pub trait Segmenter {
    fn segment(&mut self, sentence: &str) -> Result<Vec<String>, MoraError>;
}

/// Fallback segmenter: maximal kanji runs and maximal non-kanji runs.
#[derive(Debug, Clone, Copy, Default)]
pub struct KanjiRunSegmenter;

impl Segmenter for KanjiRunSegmenter {
    fn segment(&mut self, sentence: &str) -> Result<Vec<String>, MoraError> {
        Ok(kanji_runs(sentence).into_iter().map(|(_, s)| s).collect())
    }
}

fn kanji_runs(text: &str) -> Vec<(bool, String)> {
    let mut runs: Vec<(bool, String)> = Vec::new();
    for c in text.chars().filter(|c| !is_space(*c)) {
        let k = is_kanji(c);
        match runs.last_mut() {
            Some((kind, s)) if *kind == k => s.push(c),
            _ => runs.push((k, c.to_string())),
        }
    }
    runs
}

/// Resolves kanji to kana with the default dictionary readings and splits
/// the result into moras. Punctuation is dropped.
///
/// A word found as a whole uses its own entry; otherwise each kanji run
/// inside it is looked up separately.
pub fn resolve_readings(
    text: &str,
    segmenter: &mut dyn Segmenter,
    dict: &ReadingDictionary,
) -> Result<MoraReading, MoraError> {
    let surface: String = text.nfc().collect();
    let words = segmenter.segment(&surface)?;
    let squeeze = |s: &str| s.chars().filter(|c| !is_space(*c)).collect::<String>();
    let joined: String = words.iter().map(|w| squeeze(w)).collect();
    if joined != squeeze(&surface) {
        return Err(MoraError::NotPartition {
            text: surface,
            words,
        });
    }

    let mut kana = String::new();
    let mut unknown = Vec::new();
    for word in &words {
        let word: String = word
            .nfc()
            .filter(|c| !is_space(*c) && !is_ignorable(*c))
            .collect();
        if !word.chars().any(is_kanji) {
            kana.push_str(&word);
            continue;
        }
        if let Some(r) = dict.default_reading(&word) {
            kana.push_str(r);
            continue;
        }
        let mut resolved = String::new();
        let mut ok = true;
        for (is_k, run) in kanji_runs(&word) {
            if !is_k {
                resolved.push_str(&run);
            } else if let Some(r) = dict.default_reading(&run) {
                resolved.push_str(r);
            } else {
                ok = false;
                break;
            }
        }
        if ok {
            kana.push_str(&resolved);
        } else {
            unknown.push(word);
        }
    }
    if !unknown.is_empty() {
        return Err(MoraError::UnknownReading { words: unknown });
    }
    let reading = tokenize_kana(&kana)?;
    Ok(MoraReading { surface, reading })
}

pub fn count_moras(
    text: &str,
    segmenter: &mut dyn Segmenter,
    dict: &ReadingDictionary,
) -> Result<usize, MoraError> {
    resolve_readings(text, segmenter, dict).map(|r| r.mora_count())
}

/// Kanji-bearing words of `text` (after segmentation) that `dict` cannot
/// resolve, in first-seen order.
pub fn unresolved_words(
    text: &str,
    segmenter: &mut dyn Segmenter,
    dict: &ReadingDictionary,
) -> Result<Vec<String>, MoraError> {
    match resolve_readings(text, segmenter, dict) {
        Ok(_) => Ok(Vec::new()),
        Err(MoraError::UnknownReading { words }) => Ok(words),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surfaces(s: &str) -> Vec<String> {
        tokenize_kana(s)
            .unwrap()
            .into_iter()
            .map(|t| t.surface)
            .collect()
    }

    fn count(s: &str) -> usize {
        count_moras(
            s,
            &mut KanjiRunSegmenter,
            &ReadingDictionary::bundled_mini(),
        )
        .unwrap()
    }

    #[test]
    fn table_readings() {
        assert_eq!(tokenize_kana("りはな").unwrap().len(), 3);
        assert_eq!(tokenize_kana("り").unwrap().len(), 1);
        assert_eq!(tokenize_kana("はな").unwrap().len(), 2);
    }

    #[test]
    fn yoon_binds_to_previous() {
        assert_eq!(surfaces("きょう"), ["きょ", "う"]);
        assert_eq!(tokenize_kana("きょう").unwrap()[0].kind, KanaKind::Yoon);
        assert_eq!(surfaces("ファン"), ["ファ", "ン"]);
        assert_eq!(tokenize_kana("ファ").unwrap()[0].kind, KanaKind::Plain);
    }

    #[test]
    fn special_moras() {
        let t = tokenize_kana("がっこう").unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t[1].kind, KanaKind::Sokuon);
        let t = tokenize_kana("コーヒー").unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t[1].kind, KanaKind::Choon);
        let t = tokenize_kana("にほん").unwrap();
        assert_eq!(t[2].kind, KanaKind::MoraicN);
    }

    #[test]
    fn spaces_are_skipped() {
        assert_eq!(surfaces("は な\u{3000}び"), ["は", "な", "び"]);
    }

    #[test]
    fn rejects_non_kana() {
        assert_eq!(
            tokenize_kana("は離"),
            Err(MoraError::NotKana {
                ch: '離',
                position: 1
            })
        );
        assert_eq!(
            tokenize_kana("abc"),
            Err(MoraError::NotKana {
                ch: 'a',
                position: 0
            })
        );
        assert_eq!(
            tokenize_kana("ょう"),
            Err(MoraError::DanglingSmallKana {
                ch: 'ょ',
                position: 0
            })
        );
        assert!(matches!(
            tokenize_kana("っゃ"),
            Err(MoraError::DanglingSmallKana { .. })
        ));
        assert!(matches!(
            tokenize_kana("きょゃ"),
            Err(MoraError::DanglingSmallKana { .. })
        ));
    }

    #[test]
    fn decomposed_input_is_normalized() {
        // か + combining dakuten
        assert_eq!(surfaces("か\u{3099}"), ["が"]);
    }

    #[test]
    fn resolves_default_reading() {
        let dict = ReadingDictionary::bundled_mini();
        let r = resolve_readings("離", &mut KanjiRunSegmenter, &dict).unwrap();
        assert_eq!(r.kana(), "り");
        assert_eq!(r.mora_count(), 1);
        assert_eq!(dict.readings("離").unwrap(), ["り", "はな"]);
    }

    #[test]
    fn kana_passes_through() {
        let r = resolve_readings(
            "はな",
            &mut KanjiRunSegmenter,
            &ReadingDictionary::default(),
        )
        .unwrap();
        assert_eq!(r.kana(), "はな");
        assert_eq!(r.mora_count(), 2);
    }

    struct Fixed(Vec<&'static str>);
    impl Segmenter for Fixed {
        fn segment(&mut self, _: &str) -> Result<Vec<String>, MoraError> {
            Ok(self.0.iter().map(|s| s.to_string()).collect())
        }
    }

    #[test]
    fn whole_word_entry_wins() {
        let dict = ReadingDictionary::bundled_mini();
        let r = resolve_readings("離れ", &mut Fixed(vec!["離れ"]), &dict).unwrap();
        assert_eq!(r.kana(), "はなれ");
        assert_eq!(r.mora_count(), 3);
        // The run fallback reads the kanji alone.
        let r = resolve_readings("離れ", &mut KanjiRunSegmenter, &dict).unwrap();
        assert_eq!(r.kana(), "りれ");
    }

    #[test]
    fn unknown_kanji_listed() {
        let err = resolve_readings(
            "猫と犬",
            &mut KanjiRunSegmenter,
            &ReadingDictionary::bundled_mini(),
        )
        .unwrap_err();
        assert_eq!(
            err,
            MoraError::UnknownReading {
                words: vec!["猫".into(), "犬".into()]
            }
        );
    }

    #[test]
    fn bad_segmentation_rejected() {
        let err = resolve_readings(
            "はなび",
            &mut Fixed(vec!["はな"]),
            &ReadingDictionary::default(),
        )
        .unwrap_err();
        assert!(matches!(err, MoraError::NotPartition { .. }));
    }

    #[test]
    fn punctuation_is_dropped() {
        assert_eq!(count("青空、はな。"), 6);
        assert_eq!(count("「夢」！"), 2);
    }

    #[test]
    fn counts() {
        assert_eq!(count("はな"), 2);
        assert_eq!(count(""), 0);
        assert_eq!(count("にほん"), 3);
        assert_eq!(count("日本"), 3);
        assert_eq!(count("学校"), 4);
    }

    #[test]
    fn dictionary_parsing() {
        let d = ReadingDictionary::parse("# c\n離\tり\tはな\n離\tはな\tさ\n").unwrap();
        assert_eq!(d.readings("離").unwrap(), ["り", "はな", "さ"]);
        assert!(ReadingDictionary::parse("離\n").is_err());
        assert!(ReadingDictionary::parse("離\tri\n").is_err());
        assert_eq!(ReadingDictionary::parse(&d.to_tsv()).unwrap(), d);
        assert!(ReadingDictionary::bundled_mini().len() >= 30);
    }

    #[test]
    fn extend_missing_keeps_existing() {
        let mut a = ReadingDictionary::parse("空\tそら\n").unwrap();
        let b = ReadingDictionary::parse("空\tから\n今夜\tこんや\n").unwrap();
        a.extend_missing(&b);
        assert_eq!(a.default_reading("空"), Some("そら"));
        assert_eq!(a.default_reading("今夜"), Some("こんや"));
    }
}
