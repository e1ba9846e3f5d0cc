//! Pipeline configuration.
//!
//! The file is plain `key = value` lines. `#` starts a comment line, blank
//! lines are ignored, keys are unique. Relative paths are resolved against
//! the directory holding the config file.
//!
//! ```text
//! work_dir = work
//! tempo_bpm = 120
//! adapter.transcribe.command = sv2svt-stub transcribe {input} {output}
//! adapter.transcribe.timeout_s = 60
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use sv2svt_core::phonology::OovPolicy;

use crate::error::{PipelineError, Result};

pub const WORKDIR_ENV: &str = "SV2SVT_WORKDIR";
pub const DEFAULT_TIMEOUT_S: f64 = 300.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Transcribe,
    Align,
    Vme,
    Translate,
    Segment,
    Readings,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Transcribe,
        Stage::Align,
        Stage::Vme,
        Stage::Translate,
        Stage::Segment,
        Stage::Readings,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Transcribe => "transcribe",
            Stage::Align => "align",
            Stage::Vme => "vme",
            Stage::Translate => "translate",
            Stage::Segment => "segment",
            Stage::Readings => "readings",
        }
    }

    /// Placeholders the command template must mention.
    pub fn required_placeholders(self) -> &'static [&'static str] {
        match self {
            Stage::Transcribe | Stage::Vme | Stage::Readings => &["{input}", "{output}"],
            Stage::Align => &["{input}", "{audio}", "{output}"],
            Stage::Translate => &["{input}", "{output}", "{target_syllables}"],
            // One sentence on stdin, space-separated words on stdout.
            Stage::Segment => &[],
        }
    }

    /// Stages a full run cannot do without.
    pub fn is_required(self) -> bool {
        !matches!(self, Stage::Segment | Stage::Readings)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageAdapter {
    pub stage: Stage,
    /// Program followed by argument templates.
    pub command: Vec<String>,
    pub timeout_s: f64,
}

/// Order in which the two independent branches run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    #[default]
    Concurrent,
    AlignFirst,
    VmeFirst,
}

impl FromStr for Schedule {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "concurrent" => Ok(Schedule::Concurrent),
            "align-first" => Ok(Schedule::AlignFirst),
            "vme-first" => Ok(Schedule::VmeFirst),
            other => Err(format!(
                "unknown schedule {other:?}; expected concurrent, align-first or vme-first"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub work_dir: PathBuf,
    pub source_language: String,
    pub target_language: String,
    pub tempo_bpm: f64,
    pub tick_resolution: u32,
    pub oov_policy: OovPolicy,
    pub allow_overflow: bool,
    pub median_window: Option<usize>,
    pub schedule: Schedule,
    pub cache: bool,
    /// CMUdict-format file; the bundled sample when absent.
    pub dictionary: Option<PathBuf>,
    /// Extra kanji readings merged over the bundled table.
    pub readings_dictionary: Option<PathBuf>,
    pub adapters: BTreeMap<Stage, StageAdapter>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut cfg = PipelineConfig::parse(&text, base)?;
        if let Some(dir) = std::env::var_os(WORKDIR_ENV).filter(|d| !d.is_empty()) {
            cfg.work_dir = PathBuf::from(dir);
        }
        Ok(cfg)
    }

    pub fn parse(text: &str, base: &Path) -> Result<PipelineConfig> {
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(bad(i + 1, "expected key = value"));
            };
            let key = k.trim().to_string();
            if entries
                .insert(key.clone(), (i + 1, v.trim().to_string()))
                .is_some()
            {
                return Err(bad(i + 1, &format!("duplicate key {key:?}")));
            }
        }

        let mut take = |key: &str| entries.remove(key);
        let resolve = |v: &str| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        let parsed = |key: &str, (line, v): (usize, String)| -> Result<f64> {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite() && *x > 0.0)
                .ok_or_else(|| bad(line, &format!("{key} must be a positive number")))
        };

        let work_dir = take("work_dir").map_or_else(|| base.join("work"), |(_, v)| resolve(&v));
        let source_language = take("source_language").map_or("en".into(), |(_, v)| v);
        let target_language = take("target_language").map_or("ja".into(), |(_, v)| v);
        let tempo_bpm = take("tempo_bpm").map_or(Ok(120.0), |e| parsed("tempo_bpm", e))?;
        let tick_resolution = match take("tick_resolution") {
            None => 480,
            Some((line, v)) => v
                .parse::<u32>()
                .ok()
                .filter(|&r| r > 0)
                .ok_or_else(|| bad(line, "tick_resolution must be a positive integer"))?,
        };
        let oov_policy = match take("oov_policy") {
            None => OovPolicy::Abort,
            Some((line, v)) => v.parse().map_err(|e: String| bad(line, &e))?,
        };
        let flag = |name: &str, e: Option<(usize, String)>| -> Result<bool> {
            match e {
                None => Ok(false),
                Some((_, v)) if v == "true" => Ok(true),
                Some((_, v)) if v == "false" => Ok(false),
                Some((line, _)) => Err(bad(line, &format!("{name} must be true or false"))),
            }
        };
        let allow_overflow = flag("allow_overflow", take("allow_overflow"))?;
        let cache = match take("cache") {
            None => true,
            e => flag("cache", e)?,
        };
        let median_window = match take("median_window") {
            None => None,
            Some((line, v)) => match v.parse::<usize>() {
                Ok(0) => None,
                Ok(w) if w % 2 == 1 => Some(w),
                _ => return Err(bad(line, "median_window must be 0 (off) or an odd number")),
            },
        };
        let schedule = match take("schedule") {
            None => Schedule::default(),
            Some((line, v)) => v.parse().map_err(|e: String| bad(line, &e))?,
        };
        let dictionary = take("dictionary").map(|(_, v)| resolve(&v));
        let readings_dictionary = take("readings_dictionary").map(|(_, v)| resolve(&v));

        let mut adapters = BTreeMap::new();
        for stage in Stage::ALL {
            let cmd_key = format!("adapter.{stage}.command");
            let timeout_key = format!("adapter.{stage}.timeout_s");
            let timeout = take(&timeout_key);
            let Some((line, command)) = take(&cmd_key) else {
                if let Some((line, _)) = timeout {
                    return Err(bad(line, &format!("{timeout_key} given without {cmd_key}")));
                }
                continue;
            };
            let timeout_s = timeout.map_or(Ok(DEFAULT_TIMEOUT_S), |e| parsed(&timeout_key, e))?;
            let mut words = shell_words::split(&command).map_err(|e| bad(line, &e.to_string()))?;
            if words.is_empty() {
                return Err(bad(line, "empty command"));
            }
            for ph in stage.required_placeholders() {
                if !words.iter().any(|w| w.contains(ph)) {
                    return Err(bad(line, &format!("{stage} command must mention {ph}")));
                }
            }
            if words[0].contains('/') {
                words[0] = resolve(&words[0]).to_string_lossy().into_owned();
            }
            adapters.insert(
                stage,
                StageAdapter {
                    stage,
                    command: words,
                    timeout_s,
                },
            );
        }

        if let Some((key, (line, _))) = entries.into_iter().next() {
            return Err(bad(line, &format!("unknown key {key:?}")));
        }
        if source_language != "en" || target_language != "ja" {
            return Err(PipelineError::Config(
                "only source_language = en and target_language = ja are supported".into(),
            ));
        }
        Ok(PipelineConfig {
            work_dir,
            source_language,
            target_language,
            tempo_bpm,
            tick_resolution,
            oov_policy,
            allow_overflow,
            median_window,
            schedule,
            cache,
            dictionary,
            readings_dictionary,
            adapters,
        })
    }

    /// Checks that every configured executable can be found and that the
    /// stages a full run needs are present.
    pub fn validate(&self) -> Result<()> {
        let missing: Vec<&str> = Stage::ALL
            .into_iter()
            .filter(|s| s.is_required() && !self.adapters.contains_key(s))
            .map(Stage::name)
            .collect();
        if !missing.is_empty() {
            return Err(PipelineError::Config(format!(
                "no adapter configured for: {}",
                missing.join(", ")
            )));
        }
        for adapter in self.adapters.values() {
            resolve_program(&adapter.command[0]).ok_or_else(|| {
                PipelineError::Config(format!(
                    "{} adapter: executable {:?} not found",
                    adapter.stage, adapter.command[0]
                ))
            })?;
        }
        for path in self.dictionary.iter().chain(&self.readings_dictionary) {
            if !path.is_file() {
                return Err(PipelineError::Config(format!(
                    "{} does not exist",
                    path.display()
                )));
            }
        }
        Ok(())
    }
}

fn bad(line: usize, message: &str) -> PipelineError {
    PipelineError::Config(format!("line {line}: {message}"))
}

/// Finds an executable. Paths are used as given; bare names are looked up
/// next to the running binary first, then on `PATH`.
pub fn resolve_program(program: &str) -> Option<PathBuf> {
    if program.contains('/') {
        let p = PathBuf::from(program);
        return p.is_file().then_some(p);
    }
    let sibling = std::env::current_exe()
        .ok()
        .and_then(|exe| exe.parent().map(|d| d.join(program)));
    let path_dirs = std::env::var_os("PATH")
        .map(|p| std::env::split_paths(&p).collect::<Vec<_>>())
        .unwrap_or_default();
    sibling
        .into_iter()
        .chain(path_dirs.into_iter().map(|d| d.join(program)))
        .find(|p| p.is_file())
}
