//! ARPAbet phonemes, CMUdict-format pronunciation dictionaries and
//! nearest-vowel syllabification.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PhonologyError {
    #[error("line {line}: entry has no phonemes")]
    MissingPhonemes { line: usize },
    #[error("line {line}: unknown ARPAbet symbol {symbol:?}")]
    UnknownSymbol { line: usize, symbol: String },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate entry {word}({variant})")]
    Duplicate {
        line: usize,
        word: String,
        variant: u32,
    },
    #[error("phoneme sequence has no vowel to act as a syllable nucleus")]
    NoNucleus,
    #[error("out-of-vocabulary words: {}", .words.join(", "))]
    OutOfVocabulary { words: Vec<String> },
}

/// The 39 ARPAbet symbols used by CMUdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arpabet {
    AA,
    AE,
    AH,
    AO,
    AW,
    AY,
    EH,
    ER,
    EY,
    IH,
    IY,
    OW,
    OY,
    UH,
    UW,
    B,
    CH,
    D,
    DH,
    F,
    G,
    HH,
    JH,
    K,
    L,
    M,
    N,
    NG,
    P,
    R,
    S,
    SH,
    T,
    TH,
    V,
    W,
    Y,
    Z,
    ZH,
}

impl Arpabet {
    pub const ALL: [Arpabet; 39] = {
        use Arpabet::*;
        [
            AA, AE, AH, AO, AW, AY, EH, ER, EY, IH, IY, OW, OY, UH, UW, B, CH, D, DH, F, G, HH, JH,
            K, L, M, N, NG, P, R, S, SH, T, TH, V, W, Y, Z, ZH,
        ]
    };

    pub fn is_vowel(self) -> bool {
        use Arpabet::*;
        matches!(
            self,
            AA | AE | AH | AO | AW | AY | EH | ER | EY | IH | IY | OW | OY | UH | UW
        )
    }

    pub fn as_str(self) -> &'static str {
        use Arpabet::*;
        match self {
            AA => "AA",
            AE => "AE",
            AH => "AH",
            AO => "AO",
            AW => "AW",
            AY => "AY",
            EH => "EH",
            ER => "ER",
            EY => "EY",
            IH => "IH",
            IY => "IY",
            OW => "OW",
            OY => "OY",
            UH => "UH",
            UW => "UW",
            B => "B",
            CH => "CH",
            D => "D",
            DH => "DH",
            F => "F",
            G => "G",
            HH => "HH",
            JH => "JH",
            K => "K",
            L => "L",
            M => "M",
            N => "N",
            NG => "NG",
            P => "P",
            R => "R",
            S => "S",
            SH => "SH",
            T => "T",
            TH => "TH",
            V => "V",
            W => "W",
            Y => "Y",
            Z => "Z",
            ZH => "ZH",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Arpabet> {
        Arpabet::ALL.into_iter().find(|a| a.as_str() == s)
    }
}

impl fmt::Display for Arpabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Lexical stress marker carried by vowels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stress {
    Unstressed = 0,
    Primary = 1,
    Secondary = 2,
}

impl Stress {
    fn from_digit(d: u8) -> Option<Stress> {
        match d {
            b'0' => Some(Stress::Unstressed),
            b'1' => Some(Stress::Primary),
            b'2' => Some(Stress::Secondary),
            _ => None,
        }
    }
}

/// One ARPAbet phoneme. Vowels always carry a stress digit, consonants never do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Phoneme {
    symbol: Arpabet,
    stress: Option<Stress>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PhonemeParseError {
    #[error("unknown ARPAbet symbol {0:?}")]
    Unknown(String),
    #[error("vowel {0:?} is missing its stress digit")]
    MissingStress(String),
    #[error("consonant {0:?} cannot carry stress")]
    StressedConsonant(String),
}

impl Phoneme {
    pub fn consonant(symbol: Arpabet) -> Option<Phoneme> {
        (!symbol.is_vowel()).then_some(Phoneme {
            symbol,
            stress: None,
        })
    }

    pub fn vowel(symbol: Arpabet, stress: Stress) -> Option<Phoneme> {
        symbol.is_vowel().then_some(Phoneme {
            symbol,
            stress: Some(stress),
        })
    }

    pub fn symbol(&self) -> Arpabet {
        self.symbol
    }

    pub fn stress(&self) -> Option<Stress> {
        self.stress
    }

    pub fn is_vowel(&self) -> bool {
        self.symbol.is_vowel()
    }

    /// Parses an aligner label, where vowels may come without a stress digit.
    /// Such vowels are read as unstressed; stress is not used downstream.
    pub fn parse_label(s: &str) -> Result<Phoneme, PhonemeParseError> {
        match s.parse::<Phoneme>() {
            Err(PhonemeParseError::MissingStress(_)) => {
                let symbol = Arpabet::from_symbol(s).expect("symbol checked by parse");
                Ok(Phoneme {
                    symbol,
                    stress: Some(Stress::Unstressed),
                })
            }
            other => other,
        }
    }
}

impl FromStr for Phoneme {
    type Err = PhonemeParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (base, stress) = match s.as_bytes().last() {
            Some(d) if d.is_ascii_digit() => (&s[..s.len() - 1], Some(*d)),
            _ => (s, None),
        };
        let symbol =
            Arpabet::from_symbol(base).ok_or_else(|| PhonemeParseError::Unknown(s.to_string()))?;
        match (symbol.is_vowel(), stress) {
            (true, Some(d)) => {
                let stress = Stress::from_digit(d)
                    .ok_or_else(|| PhonemeParseError::Unknown(s.to_string()))?;
                Ok(Phoneme {
                    symbol,
                    stress: Some(stress),
                })
            }
            (true, None) => Err(PhonemeParseError::MissingStress(s.to_string())),
            (false, None) => Ok(Phoneme {
                symbol,
                stress: None,
            }),
            (false, Some(_)) => Err(PhonemeParseError::StressedConsonant(s.to_string())),
        }
    }
}

impl fmt::Display for Phoneme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol.as_str())?;
        if let Some(s) = self.stress {
            write!(f, "{}", s as u8)?;
        }
        Ok(())
    }
}

impl Serialize for Phoneme {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Phoneme {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses a whitespace-separated phoneme string such as `"B L UW1"`.
pub fn parse_phonemes(s: &str) -> Result<Vec<Phoneme>, PhonemeParseError> {
    s.split_whitespace().map(str::parse).collect()
}

pub fn vowel_count(phonemes: &[Phoneme]) -> usize {
    phonemes.iter().filter(|p| p.is_vowel()).count()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PronunciationEntry {
    pub word: String,
    /// 0 is the primary pronunciation, n marks the `WORD(n)` alternate.
    pub variant: u32,
    pub phonemes: Vec<Phoneme>,
}

impl fmt::Display for PronunciationEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.word)?;
        if self.variant > 0 {
            write!(f, "({})", self.variant)?;
        }
        f.write_str(" ")?;
        for p in &self.phonemes {
            write!(f, " {p}")?;
        }
        Ok(())
    }
}

/// Read-only word lookup built from CMUdict-format text.
#[derive(Debug, Clone, Default)]
pub struct PronunciationDict {
    entries: Vec<PronunciationEntry>,
    index: HashMap<String, Vec<usize>>,
}

const BUNDLED_SAMPLE: &str = include_str!("../data/cmudict-sample.txt");

impl PronunciationDict {
    /// The 1000-entry CMUdict sample shipped with the crate.
    pub fn bundled_sample() -> PronunciationDict {
        PronunciationDict::parse(BUNDLED_SAMPLE).expect("bundled sample is valid")
    }

    /// Parses `WORD  PH PH ...` lines. `;;;` lines are comments, blank lines are skipped.
    pub fn parse(text: &str) -> Result<PronunciationDict, PhonologyError> {
        let mut dict = PronunciationDict::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.starts_with(";;;") || line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let head = fields.next().expect("non-blank line has a field");
            let (word, variant) =
                parse_headword(head).ok_or_else(|| PhonologyError::Malformed {
                    line: line_no,
                    message: format!("bad headword {head:?}"),
                })?;
            let phonemes = fields
                .map(|tok| {
                    tok.parse::<Phoneme>()
                        .map_err(|_| PhonologyError::UnknownSymbol {
                            line: line_no,
                            symbol: tok.to_string(),
                        })
                })
                .collect::<Result<Vec<_>, _>>()?;
            if phonemes.is_empty() {
                return Err(PhonologyError::MissingPhonemes { line: line_no });
            }
            let entries = &mut dict.entries;
            let slots = dict.index.entry(word.clone()).or_default();
            if slots.iter().any(|&k| entries[k].variant == variant) {
                return Err(PhonologyError::Duplicate {
                    line: line_no,
                    word,
                    variant,
                });
            }
            slots.push(entries.len());
            entries.push(PronunciationEntry {
                word,
                variant,
                phonemes,
            });
            slots.sort_by_key(|&k| entries[k].variant);
        }
        Ok(dict)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// All entries in file order.
    pub fn entries(&self) -> &[PronunciationEntry] {
        &self.entries
    }

    /// Entries for a word, ordered by variant. Lookup normalizes case and
    /// surrounding punctuation.
    pub fn lookup(&self, word: &str) -> Vec<&PronunciationEntry> {
        self.index
            .get(&normalize_word(word))
            .map(|slots| slots.iter().map(|&k| &self.entries[k]).collect())
            .unwrap_or_default()
    }

    /// The variant-0 pronunciation, or the lowest variant present.
    pub fn primary(&self, word: &str) -> Option<&PronunciationEntry> {
        self.lookup(word).into_iter().next()
    }

    /// Writes the dictionary back out as CMUdict text, one entry per line.
    pub fn to_cmudict_string(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }
}

fn parse_headword(head: &str) -> Option<(String, u32)> {
    match head.split_once('(') {
        Some((word, rest)) => {
            let n = rest.strip_suffix(')')?.parse().ok()?;
            (!word.is_empty()).then(|| (word.to_string(), n))
        }
        None => Some((head.to_string(), 0)),
    }
}

/// Uppercases a transcript token and strips punctuation around it.
/// Inner apostrophes and hyphens survive (`don't` -> `DON'T`).
pub fn normalize_word(word: &str) -> String {
    word.trim_matches(|c: char| !c.is_alphanumeric())
        .to_uppercase()
}

/// A syllable: exactly one vowel plus the consonants attached to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Syllable {
    phonemes: Vec<Phoneme>,
    nucleus_index: usize,
}

impl Syllable {
    /// Builds a syllable, checking the one-vowel invariant.
    pub fn new(phonemes: Vec<Phoneme>) -> Result<Syllable, PhonologyError> {
        let mut vowels = phonemes.iter().enumerate().filter(|(_, p)| p.is_vowel());
        let (nucleus_index, _) = vowels.next().ok_or(PhonologyError::NoNucleus)?;
        if vowels.next().is_some() {
            return Err(PhonologyError::Malformed {
                line: 0,
                message: "syllable has more than one vowel".into(),
            });
        }
        Ok(Syllable {
            phonemes,
            nucleus_index,
        })
    }

    pub fn phonemes(&self) -> &[Phoneme] {
        &self.phonemes
    }

    pub fn nucleus_index(&self) -> usize {
        self.nucleus_index
    }

    pub fn nucleus(&self) -> Phoneme {
        self.phonemes[self.nucleus_index]
    }

    /// Attaches extra consonants before the onset, e.g. from a vowel-less token.
    pub fn prepend(&mut self, extra: &[Phoneme]) {
        debug_assert!(extra.iter().all(|p| !p.is_vowel()));
        self.nucleus_index += extra.len();
        self.phonemes.splice(0..0, extra.iter().copied());
    }

    pub fn append(&mut self, extra: &[Phoneme]) {
        debug_assert!(extra.iter().all(|p| !p.is_vowel()));
        self.phonemes.extend_from_slice(extra);
    }
}

/// Stress-free spelling, e.g. `BLUW`.
impl fmt::Display for Syllable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.phonemes {
            f.write_str(p.symbol().as_str())?;
        }
        Ok(())
    }
}

/// Splits a phoneme sequence into one syllable per vowel.
///
/// Each consonant joins the vowel at the smaller phoneme distance; at equal
/// distance it joins the vowel on its right. Between two vowels with `k`
/// consonants in between, the left vowel therefore takes `floor(k/2)` of
/// them. Leading consonants go to the first vowel and trailing ones to the
/// last.
pub fn syllabify(phonemes: &[Phoneme]) -> Result<Vec<Syllable>, PhonologyError> {
    let vowels: Vec<usize> = phonemes
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.is_vowel().then_some(i))
        .collect();
    if vowels.is_empty() {
        return Err(PhonologyError::NoNucleus);
    }

    let mut bounds = Vec::with_capacity(vowels.len() + 1);
    bounds.push(0);
    for pair in vowels.windows(2) {
        let gap = pair[1] - pair[0] - 1;
        bounds.push(pair[0] + 1 + gap / 2);
    }
    bounds.push(phonemes.len());

    Ok(bounds
        .windows(2)
        .zip(&vowels)
        .map(|(span, &v)| Syllable {
            phonemes: phonemes[span[0]..span[1]].to_vec(),
            nucleus_index: v - span[0],
        })
        .collect())
}

/// What to do with a word missing from the dictionary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OovPolicy {
    #[default]
    Abort,
    /// Count the word as a single syllable.
    Skip,
}

impl FromStr for OovPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "abort" => Ok(OovPolicy::Abort),
            "skip" => Ok(OovPolicy::Skip),
            other => Err(format!(
                "unknown OOV policy {other:?} (expected abort or skip)"
            )),
        }
    }
}

/// Total vowel count of a line's words under their primary pronunciations.
pub fn count_syllables(
    line: &str,
    dict: &PronunciationDict,
    oov: OovPolicy,
) -> Result<usize, PhonologyError> {
    let mut total = 0;
    let mut missing = Vec::new();
    for token in line.split_whitespace() {
        let word = normalize_word(token);
        if word.is_empty() {
            continue;
        }
        match dict.primary(&word) {
            Some(entry) => total += vowel_count(&entry.phonemes),
            None if oov == OovPolicy::Skip => total += 1,
            None => missing.push(word),
        }
    }
    if missing.is_empty() {
        Ok(total)
    } else {
        Err(PhonologyError::OutOfVocabulary { words: missing })
    }
}
