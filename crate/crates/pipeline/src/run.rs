//! End-to-end orchestration.
//!
//! transcribe → (align → notes ‖ vme → deviation) → per line: translate →
//! readings → select → assign → merge. The align and vme branches share no
//! files, so they may run in either order or at once; lines are processed
//! independently of each other.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::Serialize;
use sv2svt_core::fit::{assign_lyrics, select_candidate, FitReport, Moraics};
use sv2svt_core::interchange::{
    parse_candidates, parse_transcript, write_deviation, write_notes, write_project, Metadata,
    SynthProject, Transcript,
};
use sv2svt_core::melody::{contour_to_deviation, parse_contour, ContourOptions, DeviationCurve};
use sv2svt_core::moraic::{
    unresolved_words, KanjiRunSegmenter, MoraError, ReadingDictionary, Segmenter,
};
use sv2svt_core::phonology::{normalize_word, OovPolicy, PronunciationDict};
use sv2svt_core::time::Seconds;
use sv2svt_core::timing::{
    build_notes, parse_timed_labels, NoteSequence, SyllableNote, TimedPhoneme, WordSyllables,
};

use crate::adapter::{invoke, run_file_stage};
use crate::cache::{Cache, KeyBuilder};
use crate::config::{PipelineConfig, Schedule, Stage, StageAdapter};
use crate::error::{read_to_string, write, PipelineError, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ran,
    Cached,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageRecord {
    pub stage: Stage,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    pub status: StageStatus,
    pub key: String,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub stderr: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineReport {
    pub index: usize,
    pub text: String,
    pub start_s: Seconds,
    pub end_s: Seconds,
    pub target_syllables: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitReport>,
    pub lyrics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub stages: Vec<StageRecord>,
    pub lines: Vec<LineReport>,
    pub merged_words: Vec<usize>,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn all_cached(&self) -> bool {
        self.stages.iter().all(|s| s.status == StageStatus::Cached)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub struct RunOutcome {
    pub project: SynthProject,
    pub project_json: String,
    pub report: RunReport,
}

/// Loads the pronunciation dictionary named by the config, or the bundled
/// sample.
pub fn load_pronunciations(path: Option<&Path>) -> Result<PronunciationDict> {
    match path {
        None => Ok(PronunciationDict::bundled_sample()),
        Some(p) => PronunciationDict::parse(&read_to_string(p)?)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", p.display()))),
    }
}

/// The bundled reading table, extended by an optional user table whose
/// entries take precedence.
pub fn load_readings(path: Option<&Path>) -> Result<ReadingDictionary> {
    let mut dict = ReadingDictionary::bundled_mini();
    if let Some(p) = path {
        let mut user = ReadingDictionary::parse(&read_to_string(p)?)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))?;
        user.extend_missing(&dict);
        dict = user;
    }
    Ok(dict)
}

pub struct Pipeline<'a> {
    cfg: &'a PipelineConfig,
    cache: Cache,
    pronunciations: PronunciationDict,
    readings: ReadingDictionary,
    records: Mutex<Vec<StageRecord>>,
    warnings: Mutex<Vec<String>>,
}

struct LineOutcome {
    notes: Vec<SyllableNote>,
    report: LineReport,
}

impl<'a> Pipeline<'a> {
    pub fn new(cfg: &'a PipelineConfig) -> Result<Pipeline<'a>> {
        cfg.validate()?;
        Ok(Pipeline {
            cfg,
            cache: Cache::open(&cfg.work_dir, cfg.cache)?,
            pronunciations: load_pronunciations(cfg.dictionary.as_deref())?,
            readings: load_readings(cfg.readings_dictionary.as_deref())?,
            records: Mutex::new(Vec::new()),
            warnings: Mutex::new(Vec::new()),
        })
    }

    fn adapter(&self, stage: Stage) -> Result<&StageAdapter> {
        self.cfg
            .adapters
            .get(&stage)
            .ok_or_else(|| PipelineError::Config(format!("no adapter configured for {stage}")))
    }

    fn stage_dir(&self) -> PathBuf {
        self.cfg.work_dir.join("stages")
    }

    fn warn(&self, message: String) {
        log::info!("{message}");
        self.warnings.lock().expect("warnings lock").push(message);
    }

    fn record(
        &self,
        stage: Stage,
        line: Option<usize>,
        status: StageStatus,
        key: String,
        stderr: String,
    ) {
        self.records
            .lock()
            .expect("records lock")
            .push(StageRecord {
                stage,
                line,
                status,
                key,
                stderr,
            });
    }

    /// Runs (or replays from cache) a file-in/file-out stage. `inputs` are
    /// hashed by content; `params` are substituted and hashed verbatim.
    fn file_stage(
        &self,
        stage: Stage,
        inputs: &[(&str, &Path)],
        params: &[(&str, String)],
        output: &Path,
        line: Option<usize>,
    ) -> Result<Vec<u8>> {
        let adapter = self.adapter(stage)?;
        let mut key = KeyBuilder::for_adapter(adapter);
        for (name, path) in inputs {
            let bytes = std::fs::read(path).map_err(|e| PipelineError::io(*path, e))?;
            key = key.part(name.as_bytes()).part(&bytes);
        }
        for (name, value) in params {
            key = key.part(name.as_bytes()).part(value.as_bytes());
        }
        let key = key.finish();
        if let Some(bytes) = self.cache.get(&key) {
            write(output, &bytes)?;
            self.record(stage, line, StageStatus::Cached, key, String::new());
            return Ok(bytes);
        }
        let input = inputs
            .iter()
            .find(|(n, _)| *n == "input")
            .map(|(_, p)| *p)
            .expect("stage has an input");
        let mut bindings: Vec<(&str, String)> = inputs
            .iter()
            .filter(|(n, _)| *n != "input")
            .map(|(n, p)| (*n, p.to_string_lossy().into_owned()))
            .collect();
        bindings.extend(params.iter().cloned());
        if let Some(parent) = output.parent() {
            std::fs::create_dir_all(parent).map_err(|e| PipelineError::io(parent, e))?;
        }
        let (bytes, stderr) = run_file_stage(adapter, input, output, &bindings)?;
        self.cache.put(&key, stage.name(), &bytes)?;
        self.record(stage, line, StageStatus::Ran, key, stderr);
        Ok(bytes)
    }

    pub fn run(&self, audio: &Path) -> Result<RunOutcome> {
        if !audio.is_file() {
            return Err(PipelineError::Config(format!(
                "audio file {} not found",
                audio.display()
            )));
        }
        let dir = self.stage_dir();
        let transcript_path = dir.join("transcript.json");
        let bytes = self.file_stage(
            Stage::Transcribe,
            &[("input", audio)],
            &[],
            &transcript_path,
            None,
        )?;
        let transcript = parse_transcript(&utf8(Stage::Transcribe, bytes)?)
            .map_err(|e| adapter_output(Stage::Transcribe, e))?;
        for (i, l) in transcript.lines.iter().enumerate() {
            log::info!("line {i}: {}..{} {:?}", l.start_s, l.end_s, l.text);
        }

        let align = || self.align_branch(&transcript, &transcript_path, audio);
        let vme = || self.vme_branch(audio);
        let (notes, deviation) = match self.cfg.schedule {
            Schedule::AlignFirst => {
                let n = align();
                (n, vme())
            }
            Schedule::VmeFirst => {
                let d = vme();
                (align(), d)
            }
            Schedule::Concurrent => std::thread::scope(|s| {
                let d = s.spawn(vme);
                let n = align();
                (n, d.join().expect("vme branch panicked"))
            }),
        };
        let (notes, deviation) = (notes?, deviation?);
        for &w in &notes.merged_words {
            self.warn(format!(
                "word {w} has no vowel and was merged into a neighbouring note"
            ));
        }

        let ranges = transcript.word_ranges();
        let outcomes: Vec<Result<LineOutcome>> = std::thread::scope(|s| {
            let handles: Vec<_> = transcript
                .lines
                .iter()
                .zip(&ranges)
                .enumerate()
                .map(|(i, (line, range))| {
                    let line_notes: Vec<SyllableNote> = notes
                        .notes
                        .iter()
                        .filter(|n| range.contains(&n.word_index))
                        .cloned()
                        .collect();
                    s.spawn(move || self.line_chain(i, line, line_notes))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("line worker panicked"))
                .collect()
        });
        let mut all_notes = Vec::new();
        let mut lines = Vec::new();
        for o in outcomes {
            let o = o?;
            all_notes.extend(o.notes);
            lines.push(o.report);
        }

        let metadata = Metadata {
            source_text: transcript
                .lines
                .iter()
                .map(|l| l.text.as_str())
                .collect::<Vec<_>>()
                .join("\n"),
            target_text: lines
                .iter()
                .filter_map(|l| l.fit.as_ref().map(|f| f.text.as_str()))
                .collect::<Vec<_>>()
                .join("\n"),
            tool_version: TOOL_VERSION.into(),
        };
        let project = SynthProject::new(all_notes, deviation, metadata);
        let project_json =
            write_project(&project).map_err(|e| PipelineError::core("project", e))?;
        write(&self.cfg.work_dir.join("project.json"), &project_json)?;

        let mut stages = std::mem::take(&mut *self.records.lock().expect("records lock"));
        // A sentence segmented twice in one run shows up once, as run.
        stages.sort_by(|a, b| {
            (a.stage, a.line, &a.key, a.status == StageStatus::Cached).cmp(&(
                b.stage,
                b.line,
                &b.key,
                b.status == StageStatus::Cached,
            ))
        });
        stages.dedup_by(|later, first| later.key == first.key);
        let report = RunReport {
            stages,
            lines,
            merged_words: notes.merged_words,
            warnings: std::mem::take(&mut *self.warnings.lock().expect("warnings lock")),
        };
        write(&self.cfg.work_dir.join("report.json"), report.to_json())?;
        Ok(RunOutcome {
            project,
            project_json,
            report,
        })
    }

    fn align_branch(
        &self,
        transcript: &Transcript,
        transcript_path: &Path,
        audio: &Path,
    ) -> Result<NoteSequence> {
        let out = self.stage_dir().join("labels.tsv");
        let bytes = self.file_stage(
            Stage::Align,
            &[("input", transcript_path), ("audio", audio)],
            &[],
            &out,
            None,
        )?;
        let labels = parse_timed_labels(&utf8(Stage::Align, bytes)?)
            .map_err(|e| adapter_output(Stage::Align, e))?;
        let words = syllabify_words(
            &transcript.words(),
            &labels.phonemes,
            &self.pronunciations,
            self.cfg.oov_policy,
        )?;
        let seq =
            build_notes(&labels.phonemes, &words).map_err(|e| PipelineError::core("notes", e))?;
        write(&self.stage_dir().join("notes.json"), write_notes(&seq))?;
        Ok(seq)
    }

    fn vme_branch(&self, audio: &Path) -> Result<DeviationCurve> {
        let out = self.stage_dir().join("contour.csv");
        let bytes = self.file_stage(Stage::Vme, &[("input", audio)], &[], &out, None)?;
        let frames =
            parse_contour(&utf8(Stage::Vme, bytes)?).map_err(|e| adapter_output(Stage::Vme, e))?;
        let curve = contour_to_deviation(
            &frames,
            ContourOptions {
                median_window: self.cfg.median_window,
            },
        )
        .map_err(|e| PipelineError::core("deviation", e))?;
        write(
            &self.stage_dir().join("deviation.json"),
            write_deviation(&curve),
        )?;
        Ok(curve)
    }

    fn line_chain(
        &self,
        index: usize,
        line: &sv2svt_core::interchange::TranscriptLine,
        notes: Vec<SyllableNote>,
    ) -> Result<LineOutcome> {
        let mut report = LineReport {
            index,
            text: line.text.clone(),
            start_s: line.start_s,
            end_s: line.end_s,
            target_syllables: notes.len(),
            fit: None,
            lyrics: Vec::new(),
        };
        if notes.is_empty() {
            self.warn(format!(
                "line {index} has no sung syllables; nothing to translate"
            ));
            return Ok(LineOutcome { notes, report });
        }
        let dir = self.stage_dir().join(format!("line-{index:03}"));
        let source = dir.join("source.txt");
        write(&source, format!("{}\n", line.text))?;
        let bytes = self.file_stage(
            Stage::Translate,
            &[("input", &source)],
            &[("target_syllables", notes.len().to_string())],
            &dir.join("candidates.json"),
            Some(index),
        )?;
        let set = parse_candidates(&utf8(Stage::Translate, bytes)?)
            .map_err(|e| adapter_output(Stage::Translate, e))?;
        if set.target_syllables != notes.len() {
            return Err(PipelineError::Adapter {
                stage: Stage::Translate,
                message: format!(
                    "answered for {} syllables, asked for {}",
                    set.target_syllables,
                    notes.len()
                ),
                stderr: String::new(),
            });
        }

        let mut segmenter = self.segmenter(index);
        let mut dict = self.readings.clone();
        let mut unknown = BTreeSet::new();
        for c in &set.candidates {
            match unresolved_words(&c.text, segmenter.as_mut(), &dict) {
                Ok(words) => unknown.extend(words),
                Err(MoraError::Segmenter(m)) => {
                    return Err(PipelineError::Adapter {
                        stage: Stage::Segment,
                        message: m,
                        stderr: String::new(),
                    })
                }
                // Candidates that cannot be read at all are reported by selection.
                Err(_) => {}
            }
        }
        if !unknown.is_empty() && self.cfg.adapters.contains_key(&Stage::Readings) {
            let request = dir.join("readings-request.txt");
            write(
                &request,
                unknown.iter().map(|w| format!("{w}\n")).collect::<String>(),
            )?;
            let bytes = self.file_stage(
                Stage::Readings,
                &[("input", &request)],
                &[],
                &dir.join("readings.tsv"),
                Some(index),
            )?;
            let extra = ReadingDictionary::parse(&utf8(Stage::Readings, bytes)?)
                .map_err(|e| adapter_output(Stage::Readings, e))?;
            let mut merged = extra;
            merged.extend_missing(&dict);
            dict = merged;
        }

        let mut moraics = Moraics {
            segmenter: segmenter.as_mut(),
            dict: &dict,
        };
        let fit = select_candidate(set.into_candidates(), notes.len(), &mut moraics)
            .map_err(|e| PipelineError::core(format!("line {index}"), e))?;
        let reading = fit
            .chosen
            .reading
            .as_ref()
            .expect("selected candidate has a reading");
        let assigned = assign_lyrics(&notes, reading, self.cfg.allow_overflow)
            .map_err(|e| PipelineError::core(format!("line {index}"), e))?;
        report.lyrics = assigned
            .iter()
            .map(|n| n.lyric.clone().unwrap_or_default())
            .collect();
        report.fit = Some(FitReport::from(&fit));
        Ok(LineOutcome {
            notes: assigned,
            report,
        })
    }

    fn segmenter(&self, line: usize) -> Box<dyn Segmenter + '_> {
        match self.cfg.adapters.get(&Stage::Segment) {
            Some(a) => Box::new(CachedSegmenter {
                pipeline: self,
                adapter: a,
                line,
            }),
            None => Box::new(KanjiRunSegmenter),
        }
    }
}

/// The segment adapter behind the stage cache.
struct CachedSegmenter<'p, 'a> {
    pipeline: &'p Pipeline<'a>,
    adapter: &'p StageAdapter,
    line: usize,
}

impl Segmenter for CachedSegmenter<'_, '_> {
    fn segment(&mut self, sentence: &str) -> Result<Vec<String>, MoraError> {
        let key = KeyBuilder::for_adapter(self.adapter)
            .part(b"stdin")
            .part(sentence.as_bytes())
            .finish();
        let split = |bytes: &[u8]| -> Result<Vec<String>, MoraError> {
            let text = std::str::from_utf8(bytes)
                .map_err(|_| MoraError::Segmenter("output is not UTF-8".into()))?;
            Ok(text
                .lines()
                .next()
                .unwrap_or("")
                .split_whitespace()
                .map(str::to_string)
                .collect())
        };
        if let Some(bytes) = self.pipeline.cache.get(&key) {
            self.pipeline.record(
                Stage::Segment,
                Some(self.line),
                StageStatus::Cached,
                key,
                String::new(),
            );
            return split(&bytes);
        }
        let inv = invoke(self.adapter, &[], format!("{sentence}\n").as_bytes())
            .map_err(|e| MoraError::Segmenter(e.to_string()))?;
        self.pipeline
            .cache
            .put(&key, Stage::Segment.name(), &inv.stdout)
            .map_err(|e| MoraError::Segmenter(e.to_string()))?;
        self.pipeline.record(
            Stage::Segment,
            Some(self.line),
            StageStatus::Ran,
            key,
            inv.stderr,
        );
        split(&inv.stdout)
    }
}

fn utf8(stage: Stage, bytes: Vec<u8>) -> Result<String> {
    String::from_utf8(bytes).map_err(|_| PipelineError::Adapter {
        stage,
        message: "output is not UTF-8".into(),
        stderr: String::new(),
    })
}

fn adapter_output(stage: Stage, err: impl std::fmt::Display) -> PipelineError {
    PipelineError::Adapter {
        stage,
        message: format!("invalid output: {err}"),
        stderr: String::new(),
    }
}

/// Syllabifies each transcript word with the dictionary pronunciation that
/// matches what the aligner heard. Unknown words abort, or under the skip
/// policy fall back to the aligned phonemes.
pub fn syllabify_words(
    words: &[&str],
    timed: &[TimedPhoneme],
    dict: &PronunciationDict,
    oov: OovPolicy,
) -> Result<Vec<WordSyllables>> {
    let mut out = Vec::with_capacity(words.len());
    let mut missing = Vec::new();
    for (i, word) in words.iter().enumerate() {
        let aligned: Vec<_> = timed
            .iter()
            .filter(|p| p.word_index == i)
            .map(|p| p.phoneme)
            .collect();
        let entries = dict.lookup(&normalize_word(word));
        let same = |ph: &[sv2svt_core::phonology::Phoneme]| {
            ph.len() == aligned.len()
                && ph
                    .iter()
                    .zip(&aligned)
                    .all(|(a, b)| a.symbol() == b.symbol())
        };
        let chosen = entries
            .iter()
            .find(|e| same(&e.phonemes))
            .or(entries.first());
        match chosen {
            Some(e) => out.push(WordSyllables::from_phonemes(&e.phonemes)),
            None if oov == OovPolicy::Skip => out.push(WordSyllables::from_phonemes(&aligned)),
            None => {
                missing.push(word.to_string());
                out.push(WordSyllables::Vowelless(Vec::new()));
            }
        }
    }
    if !missing.is_empty() {
        return Err(PipelineError::core(
            "pronunciation",
            format!("out of vocabulary: {}", missing.join(", ")),
        ));
    }
    Ok(out)
}
