use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_sv2svt");

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn sv2svt(work: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("SV2SVT_WORKDIR", work)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_stub(work: &Path, extra: &[&str]) -> Output {
    let conf = fixture("fixtures/stub.conf");
    let audio = fixture("fixtures/song.wav");
    let mut args = vec![
        "run",
        "--config",
        conf.to_str().unwrap(),
        "--audio",
        audio.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    sv2svt(work, &args)
}

/// A stub config with one adapter line replaced.
fn conf_with(dir: &Path, stage: &str, replacement: &str) -> PathBuf {
    let text = std::fs::read_to_string(fixture("fixtures/stub.conf")).unwrap();
    let prefix = format!("adapter.{stage}.command");
    let text: String = text
        .lines()
        .map(|l| {
            if l.starts_with(&prefix) {
                replacement.to_string()
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    let path = dir.join("pipeline.conf");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn stub_run_matches_golden_project_and_ust() {
    let dir = tempfile::tempdir().unwrap();
    let ust = dir.path().join("song.ust");
    let o = run_stub(dir.path(), &["--ust", ust.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let project = std::fs::read(dir.path().join("project.json")).unwrap();
    assert_eq!(
        project,
        std::fs::read(fixture("tests/fixtures/golden/project.json")).unwrap()
    );
    assert_eq!(
        std::fs::read(ust).unwrap(),
        std::fs::read(fixture("tests/fixtures/golden/song.ust")).unwrap()
    );
    assert!(stdout(&o).contains("line 0: \"blueberry sky\" -> あ お ぞ ら"));
    assert!(
        stderr(&o).contains("no vowel"),
        "merged word is reported: {}",
        stderr(&o)
    );
}

#[test]
fn workdir_env_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let work = dir.path().join("elsewhere");
    let o = run_stub(&work, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(work.join("project.json").is_file());
    assert!(work.join("stages/transcript.json").is_file());
    assert!(
        !fixture("fixtures/work").exists(),
        "config work_dir must not be used"
    );
}

#[test]
fn second_run_is_fully_cached_and_identical() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_stub(dir.path(), &[]).status.success());
    let first = std::fs::read(dir.path().join("project.json")).unwrap();
    let o = run_stub(dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read(dir.path().join("project.json")).unwrap(),
        first
    );
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    let stages = report["stages"].as_array().unwrap();
    assert!(stages.len() >= 6);
    assert!(stages.iter().all(|s| s["status"] == "cached"), "{report:#}");
}

#[test]
fn schedules_give_identical_projects() {
    let golden = std::fs::read(fixture("tests/fixtures/golden/project.json")).unwrap();
    for schedule in ["concurrent", "align-first", "vme-first"] {
        let dir = tempfile::tempdir().unwrap();
        let o = run_stub(dir.path(), &["--schedule", schedule]);
        assert!(o.status.success(), "{schedule}: {}", stderr(&o));
        assert_eq!(
            std::fs::read(dir.path().join("project.json")).unwrap(),
            golden,
            "{schedule}"
        );
    }
}

#[test]
fn failing_adapter_exits_3_with_its_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let conf = conf_with(
        dir.path(),
        "vme",
        "adapter.vme.command = sv2svt-stub fail \"pitch model missing\" {input} {output}",
    );
    let audio = fixture("fixtures/song.wav");
    let o = sv2svt(
        dir.path(),
        &[
            "run",
            "--config",
            conf.to_str().unwrap(),
            "--audio",
            audio.to_str().unwrap(),
        ],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("pitch model missing"), "{}", stderr(&o));
}

#[test]
fn slow_adapter_times_out_with_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let conf = conf_with(
        dir.path(),
        "align",
        "adapter.align.command = sv2svt-stub sleep 30 {input} {audio} {output}\nadapter.align.timeout_s = 0.3",
    );
    let audio = fixture("fixtures/song.wav");
    let started = std::time::Instant::now();
    let o = sv2svt(
        dir.path(),
        &[
            "run",
            "--config",
            conf.to_str().unwrap(),
            "--audio",
            audio.to_str().unwrap(),
        ],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("timed out"), "{}", stderr(&o));
    assert!(started.elapsed().as_secs() < 20);
}

#[test]
fn adapter_output_failing_schema_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // The contour comes back where the transcript is expected.
    let conf = conf_with(
        dir.path(),
        "transcribe",
        "adapter.transcribe.command = sv2svt-stub vme {input} {output}",
    );
    let audio = fixture("fixtures/song.wav");
    let o = sv2svt(
        dir.path(),
        &[
            "run",
            "--config",
            conf.to_str().unwrap(),
            "--audio",
            audio.to_str().unwrap(),
        ],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn config_problems_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.conf");
    let o = sv2svt(
        dir.path(),
        &["validate-config", "--config", missing.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(2));

    let conf = conf_with(
        dir.path(),
        "vme",
        "adapter.vme.command = no-such-vme-tool {input} {output}",
    );
    let o = sv2svt(
        dir.path(),
        &["validate-config", "--config", conf.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no-such-vme-tool"), "{}", stderr(&o));

    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "tempo_bpm = fast\n").unwrap();
    let o = sv2svt(
        dir.path(),
        &["validate-config", "--config", bad.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(2));

    let conf = fixture("fixtures/stub.conf");
    let o = sv2svt(
        dir.path(),
        &["validate-config", "--config", conf.to_str().unwrap()],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("translate: "));
}

#[test]
fn core_validation_failures_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let o = sv2svt(dir.path(), &["syllabify", "blueberry", "zzxqv"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("zzxqv"));

    let golden = std::fs::read_to_string(fixture("tests/fixtures/golden/project.json")).unwrap();
    let shifted = dir.path().join("shifted.json");
    std::fs::write(
        &shifted,
        golden.replace("\"base_pitch\": 60", "\"base_pitch\": 61"),
    )
    .unwrap();
    let o = sv2svt(
        dir.path(),
        &["validate", "--format", "project", shifted.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn syllabify_prints_syllables_and_counts() {
    let dir = tempfile::tempdir().unwrap();
    let o = sv2svt(dir.path(), &["syllabify", "blueberry", "sky"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "blueberry\tBLUW BEH RIY\t3\nsky\tSKAY\t1\n");
    let o = sv2svt(dir.path(), &["syllabify", "--json", "blueberry"]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["syllables"], serde_json::json!(["BLUW", "BEH", "RIY"]));
}

#[test]
fn stage_commands_reproduce_the_pipeline_pieces() {
    let dir = tempfile::tempdir().unwrap();
    let notes = dir.path().join("notes.json");
    let o = sv2svt(
        dir.path(),
        &[
            "notes",
            "--labels",
            fixture("fixtures/stub/labels.tsv").to_str().unwrap(),
            "--transcript",
            fixture("fixtures/stub/transcript.json").to_str().unwrap(),
            "-o",
            notes.to_str().unwrap(),
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&notes).unwrap()).unwrap();
    assert_eq!(doc["notes"].as_array().unwrap().len(), 8);
    assert_eq!(doc["merged_words"], serde_json::json!([2]));

    let deviation = dir.path().join("deviation.json");
    let o = sv2svt(
        dir.path(),
        &[
            "contour",
            "--input",
            fixture("fixtures/stub/contour.csv").to_str().unwrap(),
            "-o",
            deviation.to_str().unwrap(),
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));

    // The first line's four notes and its candidates.
    let mut line0 = doc.clone();
    line0["notes"] = Value::Array(doc["notes"].as_array().unwrap()[..4].to_vec());
    line0["merged_words"] = serde_json::json!([]);
    let line0_path = dir.path().join("line0.json");
    std::fs::write(&line0_path, serde_json::to_string_pretty(&line0).unwrap()).unwrap();
    let lyric_notes = dir.path().join("line0-lyrics.json");
    let o = sv2svt(
        dir.path(),
        &[
            "fit-lyrics",
            "--candidates",
            fixture("fixtures/stub/candidates-0.json").to_str().unwrap(),
            "--notes",
            line0_path.to_str().unwrap(),
            "--notes-out",
            lyric_notes.to_str().unwrap(),
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let fit: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(fit["lyrics"], serde_json::json!(["あ", "お", "ぞ", "ら"]));

    // Without a segmenter adapter the kanji run is looked up alone.
    let readings = dir.path().join("readings.tsv");
    std::fs::write(&readings, "今夜\tこんや\n抱\tだ\n").unwrap();

    let o = sv2svt(
        dir.path(),
        &[
            "fit-lyrics",
            "--candidates",
            fixture("fixtures/stub/candidates-1.json").to_str().unwrap(),
            "--readings",
            readings.to_str().unwrap(),
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let fit: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(fit["fit"]["text"], "抱いて", "{fit:#}");

    let o = sv2svt(
        dir.path(),
        &[
            "export",
            "--notes",
            lyric_notes.to_str().unwrap(),
            "--deviation",
            deviation.to_str().unwrap(),
            "--format",
            "ust",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("[#VERSION]\r\nUST Version1.2\r\n"));
}

#[test]
fn export_reproduces_golden_ust_and_shift_jis() {
    let dir = tempfile::tempdir().unwrap();
    let project = fixture("tests/fixtures/golden/project.json");
    let o = sv2svt(
        dir.path(),
        &[
            "export",
            "--project",
            project.to_str().unwrap(),
            "--format",
            "ust",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        o.stdout,
        std::fs::read(fixture("tests/fixtures/golden/song.ust")).unwrap()
    );

    let o = sv2svt(
        dir.path(),
        &[
            "export",
            "--project",
            project.to_str().unwrap(),
            "--format",
            "ust",
            "--encoding",
            "shift-jis",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!stdout(&o).contains("Charset"));
    // あ in Shift-JIS.
    assert!(o.stdout.windows(2).any(|w| w == [0x82, 0xa0]));

    let o = sv2svt(
        dir.path(),
        &["export", "--project", project.to_str().unwrap()],
    );
    assert_eq!(o.stdout, std::fs::read(&project).unwrap());
}

#[test]
fn eval_stats_reports_every_question() {
    let dir = tempfile::tempdir().unwrap();
    let scores = fixture("fixtures/scores.csv");
    let o = sv2svt(
        dir.path(),
        &["eval-stats", "--scores", scores.to_str().unwrap(), "--json"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let questions = v["questions"].as_array().unwrap();
    assert_eq!(questions.len(), 6);
    for q in questions {
        let p = q["rank_sum"]["value"]["p_value"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p), "{q}");
    }
    let o = sv2svt(
        dir.path(),
        &[
            "eval-stats",
            "--scores",
            scores.to_str().unwrap(),
            "--confidence",
            "1.5",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
}
