//! Deterministic stand-in for every stage adapter.
//!
//! Each stage answers only inputs it has a canned reply for, matched by the
//! SHA-256 of the input; anything else fails like a real adapter would.
//! Two extra stages exercise failure handling: `fail MESSAGE` exits 1 and
//! `sleep SECONDS` just waits.

use std::io::{BufRead, Write};
use std::process::ExitCode;

use sha2::{Digest, Sha256};

const AUDIO: &[u8] = include_bytes!("../../fixtures/song.wav");
const TRANSCRIPT: &[u8] = include_bytes!("../../fixtures/stub/transcript.json");
const LABELS: &[u8] = include_bytes!("../../fixtures/stub/labels.tsv");
const CONTOUR: &[u8] = include_bytes!("../../fixtures/stub/contour.csv");
const LINES: [(&[u8], &[u8], usize); 2] = [
    (
        include_bytes!("../../fixtures/stub/line-0.txt"),
        include_bytes!("../../fixtures/stub/candidates-0.json"),
        4,
    ),
    (
        include_bytes!("../../fixtures/stub/line-1.txt"),
        include_bytes!("../../fixtures/stub/candidates-1.json"),
        4,
    ),
];
const SEGMENTS: &str = include_str!("../../fixtures/stub/segment.tsv");
const READINGS_REQUEST: &[u8] = include_bytes!("../../fixtures/stub/readings-request.txt");
const READINGS: &[u8] = include_bytes!("../../fixtures/stub/readings.tsv");

fn digest(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

/// The canned reply whose expected input hashes like `input`.
fn lookup<'a>(table: &[(&[u8], &'a [u8])], input: &[u8]) -> Option<&'a [u8]> {
    let key = digest(input);
    table
        .iter()
        .find(|(expected, _)| digest(expected) == key)
        .map(|(_, reply)| *reply)
}

fn usage() -> String {
    "usage: sv2svt-stub <transcribe|vme|readings> IN OUT | align IN AUDIO OUT | \
translate IN OUT TARGET | segment | fail MESSAGE | sleep SECONDS"
        .into()
}

fn file_stage(
    stage: &str,
    table: &[(&[u8], &[u8])],
    input: &str,
    output: &str,
) -> Result<(), String> {
    let bytes = std::fs::read(input).map_err(|e| format!("{input}: {e}"))?;
    let reply = lookup(table, &bytes).ok_or_else(|| {
        format!(
            "{stage}: no canned output for input {:x}",
            Sha256::digest(&bytes)
        )
    })?;
    std::fs::write(output, reply).map_err(|e| format!("{output}: {e}"))
}

fn run(args: &[String]) -> Result<(), String> {
    let arg = |i: usize| args.get(i).map(String::as_str).ok_or_else(usage);
    match arg(0)? {
        "transcribe" => file_stage("transcribe", &[(AUDIO, TRANSCRIPT)], arg(1)?, arg(2)?),
        "vme" => file_stage("vme", &[(AUDIO, CONTOUR)], arg(1)?, arg(2)?),
        "align" => {
            let audio =
                std::fs::read(arg(2)?).map_err(|e| format!("{}: {e}", arg(2).unwrap_or("")))?;
            if digest(&audio) != digest(AUDIO) {
                return Err("align: unknown audio".into());
            }
            file_stage("align", &[(TRANSCRIPT, LABELS)], arg(1)?, arg(3)?)
        }
        "translate" => {
            let target: usize = arg(3)?
                .parse()
                .map_err(|_| "translate: bad target".to_string())?;
            if target == 0 {
                return Err("translate: target_syllables must be positive".into());
            }
            let bytes = std::fs::read(arg(1)?).map_err(|e| e.to_string())?;
            let (_, reply, canned_target) = LINES
                .iter()
                .find(|(line, _, _)| digest(line) == digest(&bytes))
                .ok_or_else(|| {
                    format!(
                        "translate: no canned output for {:?}",
                        String::from_utf8_lossy(&bytes)
                    )
                })?;
            if *canned_target != target {
                return Err(format!(
                    "translate: canned for {canned_target} syllables, asked for {target}"
                ));
            }
            std::fs::write(arg(2)?, reply).map_err(|e| e.to_string())
        }
        "readings" => file_stage(
            "readings",
            &[(READINGS_REQUEST, READINGS)],
            arg(1)?,
            arg(2)?,
        ),
        "segment" => {
            let mut line = String::new();
            std::io::stdin()
                .lock()
                .read_line(&mut line)
                .map_err(|e| e.to_string())?;
            let sentence = line.trim_end_matches(['\n', '\r']);
            let words = SEGMENTS
                .lines()
                .filter_map(|row| row.split_once('\t'))
                .find(|(s, _)| digest(s.as_bytes()) == digest(sentence.as_bytes()))
                .map(|(_, w)| w)
                .ok_or_else(|| format!("segment: no canned output for {sentence:?}"))?;
            let mut out = std::io::stdout().lock();
            writeln!(out, "{words}").map_err(|e| e.to_string())
        }
        "fail" => Err(arg(1).unwrap_or("requested failure").to_string()),
        "sleep" => {
            let s: f64 = arg(1)?.parse().map_err(|_| usage())?;
            std::thread::sleep(std::time::Duration::from_secs_f64(s));
            Ok(())
        }
        _ => Err(usage()),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
