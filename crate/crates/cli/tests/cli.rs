use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;
use std::time::Instant;

use dialog_cli::report::rows_from_csv;
use dialog_cli::{cmd_eval, cmd_train, run_chat, Artifacts, CliError, ExperimentConfig, Report, ReportRow};
use dialog_core::corpus::read_nlu_file;
use dialog_core::nlu::evaluate_nlu;
use proptest::prelude::*;
use tempfile::TempDir;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/minimal")
}

fn config_path() -> PathBuf {
    fixture().join("config.json")
}

fn dialog(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dialog"))
        .args(args)
        .env_remove("DIALOG_OUTPUT_ROOT")
        .output()
        .expect("binary runs")
}

fn train_into(dir: &Path) -> Output {
    dialog(&["--config", config_path().to_str().unwrap(), "train", "--out", dir.to_str().unwrap()])
}

/// Artifacts trained once for the in-process chat tests.
fn trained() -> &'static Artifacts {
    static ART: OnceLock<Artifacts> = OnceLock::new();
    ART.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let cfg = ExperimentConfig::load(&config_path()).unwrap();
        cmd_train(&cfg, dir.path()).unwrap();
        Artifacts::load(dir.path()).unwrap()
    })
}

fn chat(input: &[u8]) -> String {
    let mut out = Vec::new();
    run_chat(trained(), input, &mut out).unwrap();
    String::from_utf8(out).unwrap()
}

#[test]
fn minimal_train_completes_quickly() {
    let dir = TempDir::new().unwrap();
    let t = Instant::now();
    let out = train_into(dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(t.elapsed().as_secs() < 60);
    for f in ["domain.json", "nlu.json", "policy.json", "adapt.json", "metrics.json", "config.json", "loss_nlu.csv", "loss_policy.csv"] {
        assert!(dir.path().join(f).is_file(), "missing {f}");
    }
}

#[test]
fn training_twice_is_byte_identical() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    assert!(train_into(a.path()).status.success());
    assert!(train_into(b.path()).status.success());
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 8);
    for n in names {
        let x = std::fs::read(a.path().join(&n)).unwrap();
        let y = std::fs::read(b.path().join(&n)).unwrap();
        assert!(x == y, "{n:?} differs");
    }
}

#[test]
fn missing_corpus_file_is_a_usage_error_naming_the_path() {
    let dir = TempDir::new().unwrap();
    let mut cfg: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(config_path()).unwrap()).unwrap();
    let fx = fixture();
    for key in ["domain", "nlu_test", "stories_train", "stories_test", "adaptation"] {
        let rel = cfg["corpus"][key].as_str().unwrap().to_string();
        cfg["corpus"][key] = fx.join(rel).to_str().unwrap().into();
    }
    cfg["corpus"]["nlu_train"] = "no_such_nlu.md".into();
    let path = dir.path().join("config.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    let out = dialog(&["--config", path.to_str().unwrap(), "train", "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(dir.path().join("no_such_nlu.md").to_str().unwrap()), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(dialog(&["train", "--fusion", "C9"]).status.code(), Some(2));
    assert_eq!(dialog(&["frobnicate"]).status.code(), Some(2));
    let out = dialog(&["chat", "--model", "/nonexistent/model"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/model"));
    assert_eq!(dialog(&["--help"]).status.code(), Some(0));
}

#[test]
fn eval_output_matches_schema() {
    let dir = TempDir::new().unwrap();
    assert!(train_into(dir.path()).status.success());
    let out_dir = dir.path().join("eval");
    let out = dialog(&[
        "--config",
        config_path().to_str().unwrap(),
        "eval",
        "--model",
        dir.path().to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let schema_text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas/eval_report.schema.json")).unwrap();
    let schema: serde_json::Value = serde_json::from_str(&schema_text).unwrap();
    let compiled = jsonschema::JSONSchema::compile(&schema).unwrap();
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(out_dir.join("metrics.json")).unwrap()).unwrap();
    if let Err(errors) = compiled.validate(&doc) {
        let msgs: Vec<String> = errors.map(|e| e.to_string()).collect();
        panic!("schema violations: {msgs:?}");
    }
    for part in ["nlu", "policy", "adaptation"] {
        assert!(doc[part].is_object(), "{part} missing");
    }
    // a document missing its hash must be rejected
    let mut broken = doc.clone();
    broken.as_object_mut().unwrap().remove("config_hash");
    assert!(!compiled.is_valid(&broken));
}

#[test]
fn eval_metrics_equal_module_calls() {
    let dir = TempDir::new().unwrap();
    let cfg = ExperimentConfig::load(&config_path()).unwrap();
    let trained = cmd_train(&cfg, dir.path()).unwrap();
    let again = cmd_eval(&cfg, dir.path(), &dir.path().join("eval")).unwrap();
    assert_eq!(trained, again);
    let art = Artifacts::load(dir.path()).unwrap();
    let test: Vec<_> = read_nlu_file(&fixture().join("nlu_test.md")).unwrap().iter().map(|e| e.example()).collect();
    let direct = evaluate_nlu(&art.nlu, &test).unwrap();
    let nlu = again.nlu.unwrap();
    assert_eq!((nlu.f1, nlu.precision, nlu.accuracy), (direct.f1, direct.precision, direct.accuracy));
}

#[test]
fn unknown_test_labels_fail_validation() {
    let model = TempDir::new().unwrap();
    let cfg = ExperimentConfig::load(&config_path()).unwrap();
    cmd_train(&cfg, model.path()).unwrap();

    let dir = TempDir::new().unwrap();
    let fx = fixture();
    let domain = std::fs::read_to_string(fx.join("domain.json"))
        .unwrap()
        .replace(r#""utter_goodbye"]"#, r#""utter_goodbye", "utter_wave"]"#);
    std::fs::write(dir.path().join("domain.json"), domain).unwrap();
    std::fs::write(dir.path().join("stories_test.md"), "## waving\n* greet\n- utter_wave\n").unwrap();
    for f in ["nlu_train.md", "nlu_test.md", "stories_train.md", "adaptation.jsonl", "config.json"] {
        std::fs::copy(fx.join(f), dir.path().join(f)).unwrap();
    }
    let cfg = ExperimentConfig::load(&dir.path().join("config.json")).unwrap();
    let err = cmd_eval(&cfg, model.path(), &dir.path().join("out")).unwrap_err();
    assert!(matches!(&err, CliError::Validation(m) if m.contains("utter_wave")), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn ablate_writes_grid_reports() {
    let dir = TempDir::new().unwrap();
    let out = dialog(&[
        "--config",
        config_path().to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "ablate",
        "--jobs",
        "2",
        "--splits",
        "0,50",
        "--fusion",
        "C1,none",
        "--seeds",
        "1,2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = Report::from_json(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report.rows.len(), 8);
    let order: Vec<(u64, &str, f64)> = report.rows.iter().map(|r| (r.seed, r.config_id.as_str(), r.exclusion)).collect();
    assert_eq!(order[..4], [(1, "C1", 0.0), (1, "C1", 50.0), (1, "none", 0.0), (1, "none", 50.0)]);
    assert!(report.rows.iter().all(ReportRow::ok));
    let csv_rows = rows_from_csv(&std::fs::read_to_string(dir.path().join("report.csv")).unwrap()).unwrap();
    assert_eq!(csv_rows, report.rows);
    assert!(dir.path().join("summary.csv").is_file() && dir.path().join("best.json").is_file());
}

#[test]
fn default_output_dir_uses_environment_root() {
    let root = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_dialog"))
        .args(["--config", config_path().to_str().unwrap(), "train"])
        .env("DIALOG_OUTPUT_ROOT", root.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let dirs: Vec<_> = std::fs::read_dir(root.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert_eq!(dirs.len(), 1);
    assert!(dirs[0].starts_with("train-") && dirs[0].len() == "train-".len() + 12, "{dirs:?}");
}

fn row(seed: u64, f1: Option<f64>) -> ReportRow {
    ReportRow {
        kind: "policy".into(),
        config_id: "C3".into(),
        exclusion: 37.5,
        seed,
        train_size: 40,
        precision: f1.map(|x| x * 0.9),
        recall: f1,
        f1,
        accuracy: f1,
        correct_stories: f1.map(|_| 3),
        stories: f1.map(|_| 15),
        status: if f1.is_some() { "ok".into() } else { "error: diverged".into() },
    }
}

#[test]
fn report_round_trips_through_json_and_csv() {
    let mut r = Report::new("ab".repeat(32));
    r.push(row(1, Some(0.1 + 0.2)));
    r.push(row(2, None));
    r.push(row(3, Some(1.0 / 3.0)));
    assert_eq!(Report::from_json(&r.to_json()).unwrap(), r);
    assert_eq!(rows_from_csv(&r.rows_csv()).unwrap(), r.rows);
    let s = r.summary();
    assert_eq!(s.len(), 1);
    assert_eq!((s[0].runs, s[0].failures), (3, 1));
    assert!((s[0].mean_f1 - (0.1 + 0.2 + 1.0 / 3.0) / 2.0).abs() < 1e-15);
}

#[test]
fn chat_golden_transcript() {
    let got = chat(b"hello robot\nsee you later\n/quit\n");
    let want = std::fs::read_to_string(fixture().join("chat.golden")).unwrap();
    assert_eq!(got, want);
}

#[test]
fn chat_quit_stops_reading() {
    let got = chat(b"/quit\nhello robot\n");
    assert_eq!(got, "bye.\n");
    assert_eq!(chat(b""), "");
}

#[test]
fn chat_trace_shows_diagnostics() {
    let got = chat(b"/trace\nhello robot\n/trace\nhello robot\n");
    let lines: Vec<&str> = got.lines().collect();
    assert_eq!(lines[0], "trace on");
    assert!(lines.iter().any(|l| l.starts_with("  intent greet")));
    assert!(lines.iter().any(|l| l.starts_with("  attention user [")));
    assert!(lines.iter().any(|l| l.starts_with("  copy gate")));
    assert!(lines.contains(&"trace off"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn chat_survives_arbitrary_bytes(input in proptest::collection::vec(any::<u8>(), 0..400)) {
        let mut out = Vec::new();
        prop_assert!(run_chat(trained(), input.as_slice(), &mut out).is_ok());
    }

    #[test]
    fn chat_survives_arbitrary_text(lines in proptest::collection::vec("\\PC{0,40}", 0..8)) {
        let input = lines.join("\n");
        let mut out = Vec::new();
        prop_assert!(run_chat(trained(), input.as_bytes(), &mut out).is_ok());
    }
}
