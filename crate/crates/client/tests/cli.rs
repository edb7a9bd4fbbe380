use std::path::Path;
use std::process::{Command, Output};
use std::sync::OnceLock;

use gaitae_core::api::ErrorBody;
use gaitae_core::harness::ExperimentReport;

/// One server for the whole test binary, on its own runtime thread.
fn server() -> &'static str {
    static URL: OnceLock<String> = OnceLock::new();
    URL.get_or_init(|| {
        let (tx, rx) = std::sync::mpsc::channel();
        std::thread::spawn(move || {
            let rt = tokio::runtime::Runtime::new().unwrap();
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                tx.send(listener.local_addr().unwrap()).unwrap();
                gaitae_server::serve(listener, gaitae_server::AppState::new(), std::future::pending())
                    .await
                    .unwrap();
            });
        });
        format!("http://{}", rx.recv().unwrap())
    })
}

fn gaitae(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaitae"))
        .arg("--server")
        .arg(server())
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn error_body(out: &Output) -> ErrorBody {
    assert!(!out.status.success());
    serde_json::from_slice(out.stderr.trim_ascii()).unwrap_or_else(|e| {
        panic!("stderr is not error JSON ({e}): {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn full_pipeline_through_individual_commands() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let models = dir.path().join("models");
    ok(gaitae(&["synth", "--out", p(&data), "--frames", "60", "--train-subjects", "2", "--test-subjects", "1"]));
    assert!(data.join("index.json").exists());
    assert!(data.join("split.json").exists());
    assert!(data.join("S03_sole_pad_15cm.csv").exists());

    ok(gaitae(&["train", "--data", p(&data), "--out", p(&models), "--epochs", "2", "--log"]));
    for f in ["model_x.json", "model_y.json", "model_z.json", "training.json", "training_log.csv"] {
        assert!(models.join(f).exists(), "{f} missing");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(models.join("training.json")).unwrap()).unwrap();
    // Normal sequences of the two training subjects only.
    assert_eq!(summary["frames"], 120);

    let normal = dir.path().join("scores/normal.csv");
    let padded = dir.path().join("scores/padded.csv");
    ok(gaitae(&["score", "--models", p(&models), "--input", p(&data.join("S03_normal.csv")), "--out", p(&normal)]));
    ok(gaitae(&[
        "score",
        "--models",
        p(&models),
        "--input",
        p(&data.join("S03_sole_pad_15cm.csv")),
        "--out",
        p(&padded),
    ]));
    let csv = std::fs::read_to_string(&normal).unwrap();
    assert!(csv.starts_with("frame,index\n"));
    assert_eq!(csv.lines().count(), 61);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(normal.with_extension("json")).unwrap()).unwrap();
    assert_eq!(json["per_segment"].as_array().unwrap().len(), 3);
    assert_eq!(json["sequence"], "S03_normal");

    let eval_dir = dir.path().join("eval");
    let table = ok(gaitae(&[
        "eval",
        "--index",
        &format!("{}=normal", p(&normal)),
        "--index",
        &format!("{}=abnormal", p(&padded)),
        "--out",
        p(&eval_dir),
    ]));
    assert!(table.contains("Sensitivity"));
    assert!(eval_dir.join("report.json").exists());
    assert!(std::fs::read_to_string(eval_dir.join("roc.csv")).unwrap().starts_with("threshold,fpr,tpr\n"));

    let filters = dir.path().join("filters");
    ok(gaitae(&["inspect-filters", "--model", p(&models.join("model_x.json")), "--out", p(&filters), "--scale", "2"]));
    let pgm = std::fs::read(filters.join("filter_000.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n"));
    assert_eq!(std::fs::read_to_string(filters.join("filters.csv")).unwrap().lines().count(), 129);
}

#[test]
fn eval_reads_score_label_csv() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("scores.csv");
    std::fs::write(&scores, "score,label\n0.1,normal\n0.4,normal\n0.35,abnormal\n0.8,abnormal\n").unwrap();
    let out = dir.path().join("eval");
    ok(gaitae(&["eval", "--scores", p(&scores), "--out", p(&out)]));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!((report["auc"].as_f64().unwrap() - 0.75).abs() < 1e-12);
}

#[test]
fn run_writes_the_report_bundle_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("manifest.json");
    std::fs::write(
        &manifest,
        r#"{"name": "small", "data": {"synthetic": {"n_frames": 60, "train_subjects": 2, "test_subjects": 2}}, "train": {"epochs": 2}}"#,
    )
    .unwrap();
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let table = ok(gaitae(&["--manifest", p(&manifest), "run", "--out", p(&out), "--batch-size", "32"]));
        assert!(table.contains("per-sequence weighted sum"));
        for f in ["report.json", "table.txt", "manifest.json", "models/model_y.json", "roc/X_axis_model.csv"] {
            assert!(out.join(f).exists(), "{f} missing");
        }
        assert!(out.join("indices/S03_normal_weighted.csv").exists());
        assert!(out.join("indices/S04_ankle_weight_4kg_sum.json").exists());
        let report: ExperimentReport =
            serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
        assert_eq!(report.manifest.train.batch_size, 32);
        reports.push(std::fs::read_to_string(out.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn run_with_a_dataset_directory() {
    let dir = tempfile::tempdir().unwrap();
    ok(gaitae(&["synth", "--out", p(&dir.path().join("data")), "--frames", "80", "--train-subjects", "1", "--test-subjects", "1"]));
    let manifest = dir.path().join("manifest.json");
    std::fs::write(
        &manifest,
        r#"{"data": {"directory": {"path": "data"}}, "split": {"train_subjects": ["S01"], "test_subjects": ["S02"]}, "train": {"epochs": 1}}"#,
    )
    .unwrap();
    ok(gaitae(&["--manifest", p(&manifest), "run", "--out", p(&dir.path().join("out"))]));
    let report: ExperimentReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report.training.subjects, ["S01"]);
    assert_eq!(report.scored.len(), 5);
}

#[test]
fn failures_print_error_json_and_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = gaitae(&["score", "--models", p(dir.path()), "--input", "missing.csv", "--out", "x.csv"]);
    assert_eq!(error_body(&out).error.kind, "io");

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "score,label\n0.3,sideways\n").unwrap();
    let out = gaitae(&["eval", "--scores", p(&bad)]);
    let body = error_body(&out);
    assert_eq!(body.error.kind, "parse");
    assert!(body.error.message.contains("line 2"));

    let one_class = dir.path().join("one.csv");
    std::fs::write(&one_class, "score,label\n0.3,normal\n0.4,normal\n").unwrap();
    assert_eq!(error_body(&gaitae(&["eval", "--scores", p(&one_class)])).error.kind, "evaluation");

    let out = gaitae(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_body(&out).error.kind, "usage");

    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let dead = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    let scores = dir.path().join("scores.csv");
    std::fs::write(&scores, "score,label\n0.1,normal\n0.8,abnormal\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_gaitae"))
        .args(["--server", &dead, "eval", "--scores", p(&scores)])
        .output()
        .unwrap();
    assert_eq!(error_body(&out).error.kind, "transport");
}
