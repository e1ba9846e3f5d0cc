//! The `sv2svt` command line.

use std::io::Read;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sv2svt_core::fit::{assign_lyrics, select_candidate, FitReport, Moraics};
use sv2svt_core::interchange::{
    parse_candidates, parse_deviation, parse_notes, parse_project, parse_transcript, validate,
    write_deviation, write_notes, write_project, Format, Metadata, SynthProject,
};
use sv2svt_core::melody::{contour_to_deviation, parse_contour, ContourOptions};
use sv2svt_core::moraic::{KanjiRunSegmenter, ReadingDictionary};
use sv2svt_core::phonology::{normalize_word, OovPolicy};
use sv2svt_core::stats::{analyze, ScoreTable};
use sv2svt_core::timing::{
    build_notes, notes_from_alignment, parse_timed_labels, NoteSequence, WordSyllables,
};
use sv2svt_core::ust::{export_ust, UstEncoding, UstOptions};

use crate::config::{PipelineConfig, Schedule};
use crate::error::{read_to_string, write, PipelineError, Result};
use crate::run::{
    load_pronunciations, load_readings, syllabify_words, Pipeline, StageStatus, TOOL_VERSION,
};

#[derive(Debug, Parser)]
#[command(
    name = "sv2svt",
    version,
    about = "English singing voice to Japanese synthesizer project"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every stage on an audio file and write the project.
    Run(RunArgs),
    /// Print the syllables of English words.
    Syllabify(SyllabifyArgs),
    /// Turn aligned phoneme labels into syllable notes.
    Notes(NotesArgs),
    /// Turn a pitch contour into a deviation curve around MIDI 60.
    Contour(ContourArgs),
    /// Pick the translation candidate that fits the syllable count.
    FitLyrics(FitArgs),
    /// Write a project as canonical JSON or UST.
    Export(ExportArgs),
    /// Means, confidence intervals and rank-sum tests for MOS scores.
    EvalStats(StatsArgs),
    /// Check a pipeline config and that its adapters can be found.
    ValidateConfig(ValidateConfigArgs),
    /// Check an interchange file against its format.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub audio: PathBuf,
    /// Also copy the project here (it is always written to the work dir).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also export UST here.
    #[arg(long)]
    pub ust: Option<PathBuf>,
    /// Override the config's branch schedule.
    #[arg(long, value_parser = parse_schedule)]
    pub schedule: Option<Schedule>,
}

#[derive(Debug, Args)]
pub struct DictArgs {
    /// CMUdict-format pronunciation file (default: bundled sample).
    #[arg(long)]
    pub dict: Option<PathBuf>,
    #[arg(long, default_value = "abort", value_parser = parse_oov)]
    pub oov: OovPolicy,
}

#[derive(Debug, Args)]
pub struct SyllabifyArgs {
    /// Words to split; read from standard input when absent.
    pub words: Vec<String>,
    #[command(flatten)]
    pub dict: DictArgs,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct NotesArgs {
    /// Phoneme label TSV from the aligner.
    #[arg(long)]
    pub labels: PathBuf,
    /// Transcript JSON; when given, words are checked against the dictionary.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    #[command(flatten)]
    pub dict: DictArgs,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ContourArgs {
    /// `time_s,f0_hz` CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Odd moving-median window over voiced frames.
    #[arg(long)]
    pub median_window: Option<usize>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub candidates: PathBuf,
    /// Notes JSON; when given, lyrics are assigned to these notes.
    #[arg(long)]
    pub notes: Option<PathBuf>,
    /// Where to write the notes with lyrics.
    #[arg(long, requires = "notes")]
    pub notes_out: Option<PathBuf>,
    /// Extra `surface<TAB>reading...` table.
    #[arg(long)]
    pub readings: Option<PathBuf>,
    #[arg(long)]
    pub allow_overflow: bool,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Project JSON. Alternatively give --notes and --deviation.
    #[arg(long, conflicts_with_all = ["notes", "deviation"], required_unless_present = "notes")]
    pub project: Option<PathBuf>,
    #[arg(long, requires = "deviation")]
    pub notes: Option<PathBuf>,
    #[arg(long)]
    pub deviation: Option<PathBuf>,
    #[arg(long, default_value = "")]
    pub source_text: String,
    #[arg(long, default_value = "")]
    pub target_text: String,
    #[arg(long, default_value = "json", value_parser = ["json", "ust"])]
    pub format: String,
    #[arg(long, default_value_t = 120.0)]
    pub tempo: f64,
    /// Ticks per quarter note.
    #[arg(long, default_value_t = 480)]
    pub resolution: u32,
    /// UST text encoding: utf-8 or shift-jis.
    #[arg(long, default_value = "utf-8", value_parser = parse_encoding)]
    pub encoding: UstEncoding,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// `subject,system,question,score` CSV.
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ValidateConfigArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// transcript, labels, contour, candidates, readings, notes, deviation or project.
    #[arg(long, value_parser = parse_format)]
    pub format: Format,
    pub file: PathBuf,
}

fn parse_schedule(s: &str) -> std::result::Result<Schedule, String> {
    s.parse()
}
fn parse_oov(s: &str) -> std::result::Result<OovPolicy, String> {
    s.parse()
}
fn parse_encoding(s: &str) -> std::result::Result<UstEncoding, String> {
    s.parse()
}
fn parse_format(s: &str) -> std::result::Result<Format, String> {
    s.parse()
}

/// What a command produced for standard output, plus diagnostics for
/// standard error.
#[derive(Debug, Default)]
pub struct Output {
    pub stdout: Vec<u8>,
    pub stderr: Vec<String>,
}

impl Output {
    fn text(s: impl Into<String>) -> Self {
        Output {
            stdout: s.into().into_bytes(),
            stderr: Vec::new(),
        }
    }
}

fn emit(out: Option<&Path>, bytes: impl Into<Vec<u8>>) -> Result<Output> {
    let bytes = bytes.into();
    match out {
        Some(p) => {
            write(p, &bytes)?;
            Ok(Output::default())
        }
        None => Ok(Output {
            stdout: bytes,
            stderr: Vec::new(),
        }),
    }
}

fn json_line<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output serializes");
    s.push('\n');
    s
}

pub fn execute(cli: Cli) -> Result<Output> {
    match cli.command {
        Command::Run(a) => run(a),
        Command::Syllabify(a) => syllabify(a),
        Command::Notes(a) => notes(a),
        Command::Contour(a) => contour(a),
        Command::FitLyrics(a) => fit_lyrics(a),
        Command::Export(a) => export(a),
        Command::EvalStats(a) => eval_stats(a),
        Command::ValidateConfig(a) => validate_config(a),
        Command::Validate(a) => {
            validate(a.format, &read_to_string(&a.file)?)
                .map_err(|e| PipelineError::core(a.file.display().to_string(), e))?;
            Ok(Output::text("ok\n"))
        }
    }
}

fn run(a: RunArgs) -> Result<Output> {
    let mut cfg = PipelineConfig::load(&a.config)?;
    if let Some(s) = a.schedule {
        cfg.schedule = s;
    }
    let outcome = Pipeline::new(&cfg)?.run(&a.audio)?;
    if let Some(p) = &a.out {
        write(p, &outcome.project_json)?;
    }
    let mut stderr = outcome.report.warnings.clone();
    if let Some(p) = &a.ust {
        let opts = UstOptions {
            tempo_bpm: cfg.tempo_bpm,
            tick_resolution: cfg.tick_resolution,
            ..UstOptions::default()
        };
        let ust = export_ust(&outcome.project, &opts).map_err(|e| PipelineError::core("ust", e))?;
        stderr.extend(ust.warnings);
        write(p, ust.bytes)?;
    }
    let mut summary = String::new();
    let mut groups: Vec<(String, usize, usize)> = Vec::new();
    for s in &outcome.report.stages {
        let name = match s.line {
            Some(l) => format!("{} line {l}", s.stage),
            None => s.stage.to_string(),
        };
        if groups.last().map(|g| &g.0) != Some(&name) {
            groups.push((name, 0, 0));
        }
        let g = groups.last_mut().expect("just pushed");
        match s.status {
            StageStatus::Ran => g.1 += 1,
            StageStatus::Cached => g.2 += 1,
        }
    }
    for (name, ran, cached) in groups {
        summary.push_str(&format!("{name}: {ran} ran, {cached} cached\n"));
    }
    for l in &outcome.report.lines {
        summary.push_str(&format!(
            "line {}: {:?} -> {}\n",
            l.index,
            l.text,
            l.lyrics.join(" ")
        ));
    }
    summary.push_str(&format!(
        "project: {}\n",
        cfg.work_dir.join("project.json").display()
    ));
    Ok(Output {
        stdout: summary.into_bytes(),
        stderr,
    })
}

#[derive(Serialize)]
struct SyllabifiedWord {
    word: String,
    syllables: Vec<String>,
}

fn syllabify(a: SyllabifyArgs) -> Result<Output> {
    let dict = load_pronunciations(a.dict.dict.as_deref())?;
    let words: Vec<String> = if a.words.is_empty() {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| PipelineError::io("<stdin>", e))?;
        s.split_whitespace().map(str::to_string).collect()
    } else {
        a.words
            .iter()
            .flat_map(|w| w.split_whitespace().map(str::to_string))
            .collect()
    };
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    for w in words {
        let Some(entry) = dict.primary(&normalize_word(&w)) else {
            if a.dict.oov == OovPolicy::Abort {
                missing.push(w);
            }
            continue;
        };
        let syllables = match WordSyllables::from_phonemes(&entry.phonemes) {
            WordSyllables::Syllables(s) => s.iter().map(ToString::to_string).collect(),
            WordSyllables::Vowelless(_) => Vec::new(),
        };
        rows.push(SyllabifiedWord { word: w, syllables });
    }
    if !missing.is_empty() {
        return Err(PipelineError::core(
            "syllabify",
            format!("out of vocabulary: {}", missing.join(", ")),
        ));
    }
    if a.json {
        return Ok(Output::text(json_line(&rows)));
    }
    let text: String = rows
        .iter()
        .map(|r| {
            format!(
                "{}\t{}\t{}\n",
                r.word,
                r.syllables.join(" "),
                r.syllables.len()
            )
        })
        .collect();
    Ok(Output::text(text))
}

fn notes(a: NotesArgs) -> Result<Output> {
    let labels = parse_timed_labels(&read_to_string(&a.labels)?)
        .map_err(|e| PipelineError::core("labels", e))?;
    let seq: NoteSequence = match &a.transcript {
        None => {
            notes_from_alignment(&labels.phonemes).map_err(|e| PipelineError::core("notes", e))?
        }
        Some(t) => {
            let transcript = parse_transcript(&read_to_string(t)?)
                .map_err(|e| PipelineError::core("transcript", e))?;
            let dict = load_pronunciations(a.dict.dict.as_deref())?;
            let words = syllabify_words(&transcript.words(), &labels.phonemes, &dict, a.dict.oov)?;
            build_notes(&labels.phonemes, &words).map_err(|e| PipelineError::core("notes", e))?
        }
    };
    emit(a.out.as_deref(), write_notes(&seq))
}

fn contour(a: ContourArgs) -> Result<Output> {
    let frames =
        parse_contour(&read_to_string(&a.input)?).map_err(|e| PipelineError::core("contour", e))?;
    let curve = contour_to_deviation(
        &frames,
        ContourOptions {
            median_window: a.median_window,
        },
    )
    .map_err(|e| PipelineError::core("deviation", e))?;
    emit(a.out.as_deref(), write_deviation(&curve))
}

#[derive(Serialize)]
struct FitOutput {
    fit: FitReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    lyrics: Option<Vec<String>>,
}

fn fit_lyrics(a: FitArgs) -> Result<Output> {
    let set = parse_candidates(&read_to_string(&a.candidates)?)
        .map_err(|e| PipelineError::core("candidates", e))?;
    let mut dict: ReadingDictionary = load_readings(None)?;
    if let Some(p) = &a.readings {
        let mut extra = ReadingDictionary::parse(&read_to_string(p)?)
            .map_err(|e| PipelineError::core("readings", e))?;
        extra.extend_missing(&dict);
        dict = extra;
    }
    let notes = match &a.notes {
        Some(p) => {
            Some(parse_notes(&read_to_string(p)?).map_err(|e| PipelineError::core("notes", e))?)
        }
        None => None,
    };
    let target = notes
        .as_ref()
        .map_or(set.target_syllables, |n| n.notes.len());
    let mut stderr = Vec::new();
    if target != set.target_syllables {
        stderr.push(format!(
            "candidates were generated for {} syllables; fitting to {target} notes",
            set.target_syllables
        ));
    }
    let mut seg = KanjiRunSegmenter;
    let mut moraics = Moraics {
        segmenter: &mut seg,
        dict: &dict,
    };
    let fit = select_candidate(set.into_candidates(), target, &mut moraics)
        .map_err(|e| PipelineError::core("fit", e))?;
    let mut lyrics = None;
    if let Some(seq) = notes {
        let reading = fit
            .chosen
            .reading
            .as_ref()
            .expect("selected candidate has a reading");
        let assigned = assign_lyrics(&seq.notes, reading, a.allow_overflow)
            .map_err(|e| PipelineError::core("fit", e))?;
        lyrics = Some(
            assigned
                .iter()
                .map(|n| n.lyric.clone().unwrap_or_default())
                .collect(),
        );
        if let Some(p) = &a.notes_out {
            write(
                p,
                write_notes(&NoteSequence {
                    notes: assigned,
                    merged_words: seq.merged_words,
                }),
            )?;
        }
    }
    let mut out = emit(
        a.out.as_deref(),
        json_line(&FitOutput {
            fit: FitReport::from(&fit),
            lyrics,
        }),
    )?;
    out.stderr = stderr;
    Ok(out)
}

fn export(a: ExportArgs) -> Result<Output> {
    let project = match (&a.project, &a.notes, &a.deviation) {
        (Some(p), _, _) => {
            parse_project(&read_to_string(p)?).map_err(|e| PipelineError::core("project", e))?
        }
        (None, Some(n), Some(d)) => {
            let seq =
                parse_notes(&read_to_string(n)?).map_err(|e| PipelineError::core("notes", e))?;
            let curve = parse_deviation(&read_to_string(d)?)
                .map_err(|e| PipelineError::core("deviation", e))?;
            SynthProject::new(
                seq.notes,
                curve,
                Metadata {
                    source_text: a.source_text,
                    target_text: a.target_text,
                    tool_version: TOOL_VERSION.into(),
                },
            )
        }
        _ => {
            return Err(PipelineError::Config(
                "give --project, or --notes with --deviation".into(),
            ))
        }
    };
    if a.format == "json" {
        let doc = write_project(&project).map_err(|e| PipelineError::core("project", e))?;
        return emit(a.out.as_deref(), doc);
    }
    let opts = UstOptions {
        tempo_bpm: a.tempo,
        tick_resolution: a.resolution,
        encoding: a.encoding,
        ..UstOptions::default()
    };
    let ust = export_ust(&project, &opts).map_err(|e| PipelineError::core("ust", e))?;
    let mut out = emit(a.out.as_deref(), ust.bytes)?;
    out.stderr = ust.warnings;
    Ok(out)
}

fn eval_stats(a: StatsArgs) -> Result<Output> {
    let table = ScoreTable::parse_csv(&read_to_string(&a.scores)?)
        .map_err(|e| PipelineError::core("scores", e))?;
    if !(a.confidence > 0.0 && a.confidence < 1.0) {
        return Err(PipelineError::Config(format!(
            "confidence must lie in (0, 1), got {}",
            a.confidence
        )));
    }
    let report = analyze(&table, a.confidence);
    Ok(Output::text(if a.json {
        report.to_json()
    } else {
        report.to_text()
    }))
}

fn validate_config(a: ValidateConfigArgs) -> Result<Output> {
    let cfg = PipelineConfig::load(&a.config)?;
    cfg.validate()?;
    let mut text = format!("ok: work_dir {}\n", cfg.work_dir.display());
    for adapter in cfg.adapters.values() {
        let program = crate::config::resolve_program(&adapter.command[0]).expect("validated");
        text.push_str(&format!("{}: {}\n", adapter.stage, program.display()));
    }
    Ok(Output::text(text))
}
