use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use stbeat::load_mono;

fn stbeat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stbeat"))
        .args(args)
        .env_remove("STBEAT_THREADS")
        .output()
        .expect("run stbeat")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn synth(path: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "--out", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = stbeat(&args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

fn write_silence(path: &Path, len: usize, rate: u32) {
    stbeat::ingest::write_wav_i16(path, &vec![0.0; len], rate).unwrap();
}

#[test]
fn synth_writes_twenty_seconds_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.wav");
    let b = dir.path().join("b.wav");
    let c = dir.path().join("c.wav");
    synth(
        &a,
        &["--bpm", "120", "--duration", "20", "--seed", "5", "--noise", "0.05"],
    );
    synth(
        &b,
        &["--bpm", "120", "--duration", "20", "--seed", "5", "--noise", "0.05"],
    );
    synth(
        &c,
        &["--bpm", "120", "--duration", "20", "--seed", "6", "--noise", "0.05"],
    );
    let buf = load_mono(&a).unwrap();
    assert_eq!(buf.len(), 882_000);
    assert_eq!(buf.sample_rate(), 44100.0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn synth_rejects_out_of_range_bpm() {
    let dir = tempfile::tempdir().unwrap();
    let out = stbeat(&[
        "synth",
        "--bpm",
        "29",
        "--out",
        dir.path().join("x.wav").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("bpm"));
    assert!(!dir.path().join("x.wav").exists());
}

#[test]
fn analyze_click_track() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("click.wav");
    synth(&wav, &["--bpm", "120", "--seed", "1", "--noise", "0.05"]);
    let out = stbeat(&["analyze", wav.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v = json(&out);
    let bpm = v["bpm"].as_f64().unwrap();
    assert!((115.2..=124.8).contains(&bpm), "bpm {bpm}");
    assert!((1.0 - v["score_b"].as_f64().unwrap()).abs() <= 1e-3);
    assert_eq!(v["effective_rate_hz"].as_f64(), Some(1102.5));
    let band = v["band_index"].as_u64().unwrap();
    let set: Vec<u64> = v["isolation_set"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| b.as_u64().unwrap())
        .collect();
    assert!(set.contains(&band));
    assert!(v["gaps"].as_array().unwrap().len() >= 2);
    assert!(stderr(&out).contains("BPM"));
}

#[test]
fn analyze_silence_is_an_isolation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("silence.wav");
    write_silence(&wav, 88_200, 44100);
    let out = stbeat(&["analyze", wav.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let v = json(&out);
    assert_eq!(v["error"], "isolation_failure");
    assert_eq!(v["scores"].as_array().unwrap().len(), 10);
    assert_eq!(v["degenerate_bands"].as_array().unwrap().len(), 10);
}

#[test]
fn configuration_and_input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("silence.wav");
    write_silence(&wav, 88_200, 44100);
    let p = wav.to_str().unwrap();

    let odd = stbeat(&["analyze", p, "--d", "41"]);
    assert_eq!(code(&odd), 1);
    assert!(stderr(&odd).contains("even"), "{}", stderr(&odd));

    let eps = stbeat(&["analyze", p, "--epsilon", "2"]);
    assert_eq!(code(&eps), 1);

    let short = stbeat(&["analyze", p, "--k", "100000"]);
    assert_eq!(code(&short), 1);
    assert!(stderr(&short).contains("insufficient"));

    assert_eq!(code(&stbeat(&["analyze", "/nonexistent/stbeat/x.wav"])), 1);
    assert_eq!(code(&stbeat(&["analyze", p, "--bogus"])), 1);
    assert_eq!(code(&stbeat(&["analyze", p, "--q", "many"])), 1);
    assert_eq!(code(&stbeat(&[])), 1);
    assert_eq!(code(&stbeat(&["--help"])), 0);
}

#[test]
fn thread_count_from_environment() {
    let bad = Command::new(env!("CARGO_BIN_EXE_stbeat"))
        .args(["evaluate", "/nonexistent.csv"])
        .env("STBEAT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&bad), 1);
    assert!(stderr(&bad).contains("STBEAT_THREADS"));

    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("empty.csv");
    std::fs::write(&manifest, "").unwrap();
    let ok = Command::new(env!("CARGO_BIN_EXE_stbeat"))
        .args(["evaluate", manifest.to_str().unwrap()])
        .env("STBEAT_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
}

#[test]
fn envelopes_csv_shape() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("click.wav");
    synth(&wav, &["--bpm", "100", "--duration", "4", "--noise", "0.05"]);
    let csv_path = dir.path().join("env.csv");
    let out = stbeat(&[
        "envelopes",
        wav.to_str().unwrap(),
        "--k",
        "441",
        "--q",
        "5",
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    let header = reader.headers().unwrap().clone();
    assert_eq!(header.len(), 5);
    // 441 rows of 1102.5 / 4410 = 0.25 Hz each.
    assert_eq!(&header[0], "0.000-110.250");
    assert_eq!(&header[4], "441.000-551.250");
    let rows: Vec<Vec<f64>> = reader
        .records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4410);
    assert!(rows.iter().all(|r| r.len() == 5 && r.iter().all(|&v| v >= 0.0)));

    let ten = stbeat(&["envelopes", wav.to_str().unwrap()]);
    assert_eq!(code(&ten), 0);
    let mut reader = csv::Reader::from_reader(&ten.stdout[..]);
    assert_eq!(reader.headers().unwrap().len(), 10);
    assert_eq!(reader.records().count(), 4400);

    let bad = stbeat(&["envelopes", wav.to_str().unwrap(), "--out", "/nonexistent/stbeat/e.csv"]);
    assert_eq!(code(&bad), 1);
}

#[test]
fn scores_and_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("click.wav");
    synth(&wav, &["--bpm", "100", "--duration", "1", "--noise", "0.05"]);
    let p = wav.to_str().unwrap();

    let out = stbeat(&["scores", p, "--q", "4"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let scores = json(&out);
    let scores = scores.as_array().unwrap();
    assert_eq!(scores.len(), 4);
    for (i, s) in scores.iter().enumerate() {
        assert_eq!(s["band_index"].as_u64(), Some(i as u64 + 1));
        let b = s["score"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&b));
        assert_eq!(s["level_scores"].as_array().unwrap().len(), 100);
    }

    let out = stbeat(&["matrix", p, "--k", "10", "--q", "2"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 20);
    assert!(rows.iter().all(|r| r.split(',').count() == 40));
}

#[test]
fn evaluate_manifests() {
    let dir = tempfile::tempdir().unwrap();

    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "path,bpm\n").unwrap();
    let out = stbeat(&["evaluate", empty.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["total"], 0);
    assert!(v["accuracy1"].is_null() && v["accuracy2"].is_null());

    assert_eq!(code(&stbeat(&["evaluate", "/nonexistent/stbeat/m.csv"])), 1);

    let wav = dir.path().join("t.wav");
    synth(&wav, &["--bpm", "120", "--duration", "4", "--noise", "0.05"]);
    let silent = dir.path().join("s.wav");
    write_silence(&silent, 176_400, 44100);
    let manifest = dir.path().join("m.csv");
    std::fs::write(&manifest, "t.wav,120\nt.wav,120\ns.wav,90\n").unwrap();
    let report = dir.path().join("r.json");
    let items = dir.path().join("items.csv");
    let out = stbeat(&[
        "evaluate",
        manifest.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
        "--items-csv",
        items.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stderr(&out).contains("accuracy1"));
    let v: Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(v["total"], 3);
    let per_item = v["per_item"].as_array().unwrap();
    assert_eq!(per_item[0], per_item[1]);
    assert!(per_item[2]["estimate"].is_null());
    assert_eq!(
        v["failures"].as_array().unwrap().len() + v["estimated"].as_u64().unwrap() as usize,
        3
    );
    assert!(v["accuracy1"].as_f64().unwrap() <= 100.0 * 2.0 / 3.0);
    assert!(v["accuracy1"].as_f64().unwrap() <= v["accuracy2"].as_f64().unwrap());
    let table = std::fs::read_to_string(&items).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert!(table.starts_with("path,truth,estimate,acc1,acc2"));
}

#[test]
fn import_ballroom_builds_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let audio = dir.path().join("audio");
    let ann = dir.path().join("ann");
    std::fs::create_dir_all(audio.join("Waltz")).unwrap();
    std::fs::create_dir_all(&ann).unwrap();
    write_silence(&audio.join("Waltz/b.wav"), 10, 44100);
    write_silence(&audio.join("a.wav"), 10, 44100);
    write_silence(&audio.join("unannotated.wav"), 10, 44100);
    std::fs::write(ann.join("a.bpm"), "120.5\n").unwrap();
    std::fs::write(ann.join("b.bpm"), "86 \n").unwrap();

    let out = stbeat(&[
        "import-ballroom",
        "--audio",
        audio.to_str().unwrap(),
        "--annotations",
        ann.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], "path,bpm");
    // Sorted by path: "Waltz/" sorts before "a.wav".
    assert!(lines[1].ends_with("Waltz/b.wav,86"), "{text}");
    assert!(lines[2].ends_with("audio/a.wav,120.5"), "{text}");
}
