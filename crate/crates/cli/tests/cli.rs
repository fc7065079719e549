mod common;

use common::*;

use baitscore::media::{self, CategoryMap};
use baitscore::synth::{separable_corpus, trend_fixture, unlabelled_corpus};

fn train_args<'a>(inst: &'a str, truth: &'a str, out: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec!["train", "--instances", inst, "--truth", truth, "--out", out, "--epochs", "20"];
    v.extend_from_slice(SMALL);
    v.extend_from_slice(extra);
    v
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let (inst, truth) = write_corpus(dir.path(), "a", &separable_corpus(4, 0));
    let out = dir.path().join("m");
    let mut args = train_args(s(&inst), s(&truth), s(&out), &[]);
    args[8] = "0";
    assert_eq!(run(&args).status.code(), Some(2));
    assert_eq!(run(&["train", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&train_args(s(&inst), s(&truth), s(&out), &["--arch", "rnn"])).status.code(), Some(2));
    assert_eq!(run(&train_args(s(&inst), s(&truth), s(&out), &["--no-text"])).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1() {
    let out = run(&["ingest", "--instances", "/nonexistent/file.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
}

#[test]
fn every_run_reports_its_spec() {
    let dir = tempfile::tempdir().unwrap();
    let (inst, truth) = write_corpus(dir.path(), "a", &separable_corpus(4, 0));
    let out = ok(&["--seed", "9", "ingest", "--instances", s(&inst), "--truth", s(&truth), "--stats"]);
    let err = String::from_utf8_lossy(&out.stderr);
    let first: serde_json::Value = serde_json::from_str(err.lines().next().unwrap()).unwrap();
    assert_eq!(first["command"], "ingest");
    assert_eq!(first["seed"], 9);
    let stats: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(stats["n_posts"], 8);
    assert_eq!(stats["display_ratio"], "1:1.00");
}

#[test]
fn evaluate_truth_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let ds = separable_corpus(5, 1);
    let (_, truth) = write_corpus(dir.path(), "a", &ds);
    let pred = dir.path().join("p.jsonl");
    let preds: Vec<_> = ds
        .aligned_truths()
        .unwrap()
        .iter()
        .map(|t| baitscore::model::Prediction { id: t.id.clone(), clickbait_score: t.truth_mean })
        .collect();
    baitscore::model::write_predictions(&preds, std::fs::File::create(&pred).unwrap()).unwrap();
    let out = ok(&["evaluate", "--pred", s(&pred), "--truth", s(&truth)]);
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["mse"], 0.0);
    assert_eq!(r["f1"], 1.0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("RMSE"));
}

#[test]
fn train_predict_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (inst, truth) = write_corpus(dir.path(), "a", &separable_corpus(16, 2));
    let model = dir.path().join("model");
    ok(&train_args(s(&inst), s(&truth), s(&model), &["--vectors", "cues", "--val-fraction", "0"]));
    let pred = dir.path().join("p.jsonl");
    ok(&["predict", "--model", s(&model), "--instances", s(&inst), "--out", s(&pred)]);
    let out = ok(&["evaluate", "--pred", s(&pred), "--truth", s(&truth)]);
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(r["mse"].as_f64().unwrap() < 0.05, "{r}");
    let stdout_pred = ok(&["predict", "--model", s(&model), "--instances", s(&inst)]).stdout;
    assert_eq!(stdout_pred, std::fs::read(&pred).unwrap());
}

#[test]
fn config_file_flags_are_overridden_by_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let (inst, truth) = write_corpus(dir.path(), "a", &separable_corpus(8, 2));
    let cfg = dir.path().join("run.cfg");
    let model = dir.path().join("m");
    let mut args = vec!["--save-config", s(&cfg)];
    args.extend(train_args(s(&inst), s(&truth), s(&model), &["--arch", "cnn"]));
    ok(&args);
    let text = std::fs::read_to_string(&cfg).unwrap();
    assert!(text.contains("arch = cnn") && text.contains("epochs = 20"), "{text}");

    let model2 = dir.path().join("m2");
    ok(&["--config", s(&cfg), "train", "--epochs", "2", "--out", s(&model2)]);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(model2.join("model.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["epochs"], 2);
    assert_eq!(meta["config"]["branch"], "cnn");
    assert_eq!(meta["history"].as_array().unwrap().len(), 2);
}

#[test]
fn selftrain_writes_merged_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let (inst, truth) = write_corpus(dir.path(), "a", &separable_corpus(8, 2));
    let (unl, _) = write_corpus(dir.path(), "u", &unlabelled_corpus(30, 3));
    let model = dir.path().join("m");
    ok(&train_args(s(&inst), s(&truth), s(&model), &[]));
    let out = dir.path().join("st");
    let o = ok(&[
        "selftrain", "--model", s(&model), "--unlabelled", s(&unl), "--labelled", s(&inst), "--truth", s(&truth),
        "--out", s(&out), "--retrain-epochs", "2",
    ]);
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["n_merged"], 46);
    assert_eq!(r["labels_preserved"], true);
    assert!(out.join("model/model.json").exists());
    ok(&["ingest", "--instances", s(&out.join("merged_instances.jsonl")), "--truth", s(&out.join("merged_truth.jsonl"))]);
}

#[test]
fn baseline_trains_and_predicts() {
    let dir = tempfile::tempdir().unwrap();
    let (inst, truth) = write_corpus(dir.path(), "a", &separable_corpus(10, 2));
    let model = dir.path().join("ab.json");
    let trace = dir.path().join("trace.json");
    ok(&[
        "baseline", "--instances", s(&inst), "--truth", s(&truth), "--out", s(&model), "--cues", "--text", "both",
        "--trace", s(&trace),
    ]);
    let pred = dir.path().join("p.jsonl");
    ok(&["predict", "--model", s(&model), "--instances", s(&inst), "--out", s(&pred)]);
    let r: serde_json::Value =
        serde_json::from_slice(&ok(&["evaluate", "--pred", s(&pred), "--truth", s(&truth)]).stdout).unwrap();
    assert!(r["mse"].as_f64().unwrap() < 0.01);
    assert!(std::fs::metadata(&trace).unwrap().len() > 0);
}

#[test]
fn analyze_media_outputs_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cmap = CategoryMap::bundled();
    let (tags, scores) = trend_fixture(60, 1, &cmap);
    let tag_path = dir.path().join("tags.jsonl");
    media::write_tags(&tags, std::fs::File::create(&tag_path).unwrap()).unwrap();
    let pred = dir.path().join("p.jsonl");
    let mut preds: Vec<_> = scores
        .into_iter()
        .map(|(id, s)| baitscore::model::Prediction { id, clickbait_score: s })
        .collect();
    preds.sort_by(|a, b| a.id.cmp(&b.id));
    baitscore::model::write_predictions(&preds, std::fs::File::create(&pred).unwrap()).unwrap();
    let csv = dir.path().join("trend.csv");
    let o = ok(&["analyze-media", "--tags", s(&tag_path), "--pred", s(&pred), "--bins", "4", "--trend-out", s(&csv)]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["classes"].is_null());
    assert_eq!(v["trend"]["bins"].as_array().unwrap().len(), 4);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("bin_center,category,proportion\n"));
    assert_eq!(run(&["analyze-media", "--tags", s(&tag_path)]).status.code(), Some(2));
}
