//! String-in, JSON-out operations behind the demo page.

use serde::Serialize;
use sv2svt_core::fit::{select_candidate, FitReport, Moraics, TranslationCandidate};
use sv2svt_core::moraic::{resolve_readings, KanaToken, KanjiRunSegmenter, ReadingDictionary};
use sv2svt_core::phonology::{normalize_word, syllabify as split, PronunciationDict};

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

#[derive(Serialize)]
struct WordSyllables {
    word: String,
    /// `None` when the word is not in the dictionary sample.
    syllables: Option<Vec<String>>,
}

/// `[{word, syllables}]` for every whitespace-separated word.
pub fn syllabify(text: &str) -> Result<String, String> {
    let dict = PronunciationDict::bundled_sample();
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let syllables = match dict.primary(&normalize_word(word)) {
            None => None,
            Some(entry) => {
                let s = split(&entry.phonemes).map_err(|e| format!("{word}: {e}"))?;
                Some(s.iter().map(ToString::to_string).collect())
            }
        };
        out.push(WordSyllables {
            word: word.to_string(),
            syllables,
        });
    }
    Ok(json(&out))
}

#[derive(Serialize)]
struct MoraView {
    kana: String,
    count: usize,
    moras: Vec<KanaToken>,
}

/// `{kana, count, moras}` using the bundled mini reading dictionary.
pub fn moras(text: &str) -> Result<String, String> {
    let dict = ReadingDictionary::bundled_mini();
    let r = resolve_readings(text, &mut KanjiRunSegmenter, &dict).map_err(|e| e.to_string())?;
    Ok(json(&MoraView {
        kana: r.kana(),
        count: r.mora_count(),
        moras: r.reading,
    }))
}

/// Candidates are one per line, `score<TAB>text`, best first or not.
pub fn fit(candidates: &str, target: usize) -> Result<String, String> {
    if target == 0 {
        return Err("the note count must be positive".into());
    }
    let mut parsed = Vec::new();
    for (i, line) in candidates
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let (score, text) = line
            .split_once('\t')
            .ok_or_else(|| format!("line {}: expected score<TAB>text", i + 1))?;
        let score: f64 = score
            .trim()
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| format!("line {}: bad score {score:?}", i + 1))?;
        parsed.push(TranslationCandidate::new(text.trim(), score));
    }
    if parsed.is_empty() {
        return Err("no candidates".into());
    }
    let dict = ReadingDictionary::bundled_mini();
    let mut seg = KanjiRunSegmenter;
    let mut moraics = Moraics {
        segmenter: &mut seg,
        dict: &dict,
    };
    let result = select_candidate(parsed, target, &mut moraics).map_err(|e| e.to_string())?;
    Ok(json(&FitReport::from(&result)))
}
