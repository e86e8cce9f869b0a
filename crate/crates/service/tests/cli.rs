use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn reverie(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reverie")).args(args).output().unwrap()
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name).display().to_string()
}

#[test]
fn usage_errors_exit_with_2() {
    assert_eq!(reverie(&["simulate", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(reverie(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(reverie(&["simulate", "--sessions", "many"]).status.code(), Some(2));
}

#[test]
fn simulate_is_byte_identical_on_repeat() {
    let a = reverie(&["simulate", "--sessions", "20", "--seed", "7"]);
    let b = reverie(&["simulate", "--sessions", "20", "--seed", "7"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let c = reverie(&["simulate", "--sessions", "20", "--seed", "8"]);
    assert_ne!(a.stdout, c.stdout);
    let summary: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(summary["unfinished"], 0);
    assert_eq!(summary["replay_identical"], 20);
}

#[test]
fn simulate_writes_replayable_logs() {
    let dir = tempfile::tempdir().unwrap();
    let logs = dir.path().join("logs");
    let out = reverie(&["simulate", "--sessions", "5", "--log-dir", logs.to_str().unwrap()]);
    assert!(out.status.success());
    let files: Vec<_> = std::fs::read_dir(&logs).unwrap().collect();
    assert_eq!(files.len(), 5);
}

#[test]
fn bad_persona_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("personas.json");
    std::fs::write(&p, r#"{"personas": []}"#).unwrap();
    let out = reverie(&["simulate", "--personas", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no personas"));
}

#[test]
fn analyze_the_bundled_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = reverie(&["analyze", "--data", &data("synthetic"), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let md = std::fs::read_to_string(dir.path().join("report.md")).unwrap();
    assert!(md.contains("## PSS-10 ANCOVA"));
    assert!(md.contains("## VAS mixed model"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["pss_ancova"]["status"], "done");
}

#[test]
fn synth_then_analyze_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("d");
    assert!(reverie(&["synth", "--out", d.to_str().unwrap(), "--seed", "4"]).status.success());
    let out = reverie(&["analyze", "--data", d.to_str().unwrap(), "--out", d.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(d.join("report.md").is_file());
}

#[test]
fn analyze_reports_the_bad_cell() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("participants.csv"), "id,group,age,gender\nA,intervention,20,female\n").unwrap();
    std::fs::write(
        dir.path().join("scales.csv"),
        "id,timepoint,instrument,item_index,value\nA,T0,pss10,1,9\n",
    )
    .unwrap();
    let out = reverie(&["analyze", "--data", dir.path().to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("scales.csv") && err.contains("value"), "{err}");
}

#[test]
fn score_scales_wide_csv() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("sus.csv");
    // contributions 4,2,4,2,4,2,3,2,3,2 -> usability 71.875, learnability 50
    std::fs::write(&p, "id,i1,i2,i3,i4,i5,i6,i7,i8,i9,i10\nP1,5,3,5,3,5,3,4,3,4,3\n").unwrap();
    let out = reverie(&["score-scales", "--instrument", "sus", "--csv", p.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let get = |k: &str| row[header.iter().position(|h| *h == k).unwrap()].parse::<f64>().unwrap();
    assert_eq!(get("total"), 70.0);

    let out = reverie(&["score-scales", "--instrument", "nope", "--csv", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn scripted_play_from_stdin() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("play.jsonl");
    let mut child = Command::new(env!("CARGO_BIN_EXE_reverie"))
        .args(["play", "--scripted", &data("demo_script.json"), "--log", log.to_str().unwrap()])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"I will fail\nI passed last time\nq\n/exit\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("[round 2: +10.0]"), "{text}");
    let log = std::fs::read_to_string(log).unwrap();
    assert!(log.lines().last().unwrap().contains("\"kind\":\"exited\""), "{log}");
}
