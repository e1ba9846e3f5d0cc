//! Subprocess execution for stage adapters.
//!
//! File-based stages get their input and output paths substituted into the
//! command template and must exit 0 after writing the output file. The
//! segment stage reads one sentence on stdin and prints the words on
//! stdout. Standard error is always captured for diagnostics.

use std::io::{Read, Write};
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::Duration;

use sv2svt_core::moraic::{MoraError, Segmenter};
use wait_timeout::ChildExt;

use crate::config::{resolve_program, StageAdapter};
use crate::error::{PipelineError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invocation {
    pub stdout: Vec<u8>,
    pub stderr: String,
}

/// Values substituted for `{name}` placeholders.
pub type Bindings<'a> = &'a [(&'a str, String)];

pub fn expand(template: &[String], bindings: Bindings<'_>) -> Vec<String> {
    template
        .iter()
        .map(|arg| {
            bindings.iter().fold(arg.clone(), |acc, (name, value)| {
                acc.replace(&format!("{{{name}}}"), value)
            })
        })
        .collect()
}

/// Runs the adapter to completion, feeding `stdin` and enforcing its
/// timeout. A nonzero exit or a timeout is an adapter error carrying the
/// captured stderr.
pub fn invoke(adapter: &StageAdapter, bindings: Bindings<'_>, stdin: &[u8]) -> Result<Invocation> {
    let argv = expand(&adapter.command, bindings);
    let fail = |message: String, stderr: String| PipelineError::Adapter {
        stage: adapter.stage,
        message,
        stderr,
    };
    let program = resolve_program(&argv[0])
        .ok_or_else(|| fail(format!("executable {:?} not found", argv[0]), String::new()))?;
    log::debug!("{}: {:?}", adapter.stage, argv);
    let mut child = Command::new(&program)
        .args(&argv[1..])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| {
            fail(
                format!("cannot start {}: {e}", program.display()),
                String::new(),
            )
        })?;

    let mut child_stdin = child.stdin.take().expect("stdin is piped");
    let input = stdin.to_vec();
    let feeder = std::thread::spawn(move || {
        // A child that exits without reading its input is not an error here.
        let _ = child_stdin.write_all(&input);
    });
    let mut out_pipe = child.stdout.take().expect("stdout is piped");
    let mut err_pipe = child.stderr.take().expect("stderr is piped");
    let out_reader = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = out_pipe.read_to_end(&mut buf);
        buf
    });
    let err_reader = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = err_pipe.read_to_end(&mut buf);
        buf
    });

    let limit = Duration::from_secs_f64(adapter.timeout_s);
    let status = match child.wait_timeout(limit) {
        Ok(Some(status)) => status,
        Ok(None) => {
            let _ = child.kill();
            let _ = child.wait();
            let stderr =
                String::from_utf8_lossy(&err_reader.join().unwrap_or_default()).into_owned();
            return Err(fail(
                format!("timed out after {} s", adapter.timeout_s),
                stderr,
            ));
        }
        Err(e) => return Err(fail(format!("wait failed: {e}"), String::new())),
    };
    let _ = feeder.join();
    let stdout = out_reader.join().unwrap_or_default();
    let stderr = String::from_utf8_lossy(&err_reader.join().unwrap_or_default()).into_owned();
    if !status.success() {
        return Err(fail(format!("exited with {status}"), stderr));
    }
    Ok(Invocation { stdout, stderr })
}

/// Runs a file-in/file-out adapter and returns its output bytes.
pub fn run_file_stage(
    adapter: &StageAdapter,
    input: &Path,
    output: &Path,
    extra: Bindings<'_>,
) -> Result<(Vec<u8>, String)> {
    let mut bindings: Vec<(&str, String)> = vec![
        ("input", input.to_string_lossy().into_owned()),
        ("output", output.to_string_lossy().into_owned()),
    ];
    bindings.extend(extra.iter().cloned());
    let _ = std::fs::remove_file(output);
    let inv = invoke(adapter, &bindings, &[])?;
    let bytes = std::fs::read(output).map_err(|e| PipelineError::Adapter {
        stage: adapter.stage,
        message: format!("no output at {}: {e}", output.display()),
        stderr: inv.stderr.clone(),
    })?;
    Ok((bytes, inv.stderr))
}

/// Word segmentation through the segment adapter, one process per
/// sentence.
pub struct SubprocessSegmenter {
    adapter: StageAdapter,
    /// Every stderr produced, for the run report.
    pub stderr: Vec<String>,
}

impl SubprocessSegmenter {
    pub fn new(adapter: StageAdapter) -> Self {
        SubprocessSegmenter {
            adapter,
            stderr: Vec::new(),
        }
    }
}

impl Segmenter for SubprocessSegmenter {
    fn segment(&mut self, sentence: &str) -> Result<Vec<String>, MoraError> {
        let inv = invoke(&self.adapter, &[], format!("{sentence}\n").as_bytes())
            .map_err(|e| MoraError::Segmenter(e.to_string()))?;
        if !inv.stderr.trim().is_empty() {
            self.stderr.push(inv.stderr);
        }
        let text = String::from_utf8(inv.stdout)
            .map_err(|_| MoraError::Segmenter("output is not UTF-8".into()))?;
        let line = text.lines().next().unwrap_or("");
        Ok(line.split_whitespace().map(str::to_string).collect())
    }
}
