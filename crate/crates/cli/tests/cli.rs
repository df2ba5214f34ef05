mod common;

use std::fs;

use common::*;
use serde_json::json;

fn three_records() -> Vec<serde_json::Value> {
    vec![
        tweet("a", "explosion near finish line", CRISIS_TIME, Some(BOSTON)),
        tweet("b", "deep dish tonight", CRISIS_TIME, Some(CHICAGO)),
        tweet("c", "praying for boston", CRISIS_TIME, None),
    ]
}

#[test]
fn partition_writes_each_group() {
    let ws = Workspace::new(&three_records(), "");
    let summary = ws.run_ok(&["partition"]);
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(summary["counts"]["imbalance_ratio"], 0.5);
    for (name, n) in [
        ("ir", 1),
        ("or", 1),
        ("pc_ir", 0),
        ("pc_or", 0),
        ("unlabeled", 1),
    ] {
        let records = read_jsonl(&ws.out(&format!("partition/{name}.jsonl")));
        assert_eq!(records.len(), n, "{name}");
    }
    let first = fs::read(ws.out("partition/summary.json")).unwrap();
    ws.run_ok(&["partition"]);
    assert_eq!(first, fs::read(ws.out("partition/summary.json")).unwrap());
}

#[test]
fn partition_of_empty_input_is_zeroed() {
    let ws = Workspace::new(&[], "");
    let summary = ws.run_ok(&["partition"]);
    assert_eq!(summary["counts"]["ir"], 0);
    assert_eq!(summary["counts"]["lines"], 0);
    assert!(summary["counts"]["imbalance_ratio"].is_null());
}

#[test]
fn malformed_lines_warn_but_succeed() {
    let ws = Workspace::new(&three_records(), "");
    let mut text = fs::read_to_string(ws.path().join("corpus.jsonl")).unwrap();
    text.push_str("{broken\n");
    fs::write(ws.path().join("corpus.jsonl"), text).unwrap();
    let summary = ws.run_ok(&["partition"]);
    assert_eq!(summary["warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn train_needs_ir_tweets() {
    let ws = Workspace::new(&[tweet("b", "deep dish", CRISIS_TIME, Some(CHICAGO))], "");
    ws.run_ok(&["partition"]);
    let out = ws.run(&["train"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("IR partition is empty"));
}

#[test]
fn separable_model_classifies_its_training_tweets() {
    let ws = Workspace::new(&marker_records(200, 1.0, 1.0, 3), "");
    ws.run_ok(&["partition"]);
    let summary = ws.run_ok(&["train"]);
    assert_eq!(summary["class_counts"], json!({"IR": 100, "OR": 100}));
    assert_eq!(summary["seed"], 11);
    let model = fs::read(ws.out("model.json")).unwrap();
    ws.run_ok(&["train"]);
    assert_eq!(model, fs::read(ws.out("model.json")).unwrap());

    // Unlabeled pool is a copy of the IR tweets: all must come back IR.
    let summary = ws.run_ok(&["classify"]);
    assert_eq!(summary["classified"], 100);
    assert_eq!(summary["classified_ir"], 100);

    // Self-classification of the geotagged tweets is perfect.
    let summary = ws.run_ok(&["classify", "--input", "out/partition/or.jsonl"]);
    assert_eq!(summary["classified_ir"], 0);

    fs::write(ws.path().join("empty.jsonl"), "").unwrap();
    let summary = ws.run_ok(&["classify", "--input", "empty.jsonl"]);
    assert_eq!(summary["classified"], 0);
    assert_eq!(
        fs::read_to_string(ws.out("classify/classified.jsonl")).unwrap(),
        ""
    );
}

#[test]
fn classify_rejects_missing_tag_layers() {
    let records = fully_tagged(&marker_records(40, 1.0, 1.0, 5));
    let ws = Workspace::new(&records, r#"classes = ["UNIGRAM", "PTB_POS"]"#);
    ws.run_ok(&["partition"]);
    ws.run_ok(&["train"]);
    write_jsonl(
        &ws.path().join("plain.jsonl"),
        &[tweet("x", "no tags here", CRISIS_TIME, None)],
    );
    let out = ws.run(&["classify", "--input", "plain.jsonl"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("PTB_POS"));
}

#[test]
fn evaluate_single_writes_fifteen_readings() {
    let ws = Workspace::new(&marker_records(60, 0.9, 0.1, 8), "");
    ws.run_ok(&["partition"]);
    let summary = ws.run_ok(&["evaluate", "--mode", "single"]);
    assert_eq!(summary["readings"], 15);
    assert_eq!(summary["baseline"]["accuracy"], 0.5);
    let csv = fs::read_to_string(ws.out("eval/cv_readings.csv")).unwrap();
    assert_eq!(csv.lines().count(), 16);
}

#[test]
fn combos_on_word_only_data_has_three_rows() {
    let ws = Workspace::new(&marker_records(40, 1.0, 0.0, 2), "fallback_tagging = false");
    ws.run_ok(&["partition"]);
    let summary = ws.run_ok(&["evaluate", "--mode", "combos"]);
    assert_eq!(summary["entries"], 3);
    assert!(!summary["warnings"].as_array().unwrap().is_empty());
    let csv = fs::read_to_string(ws.out("eval/combinations.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn combos_on_fully_tagged_data_has_sixty_three_rows() {
    let ws = Workspace::new(&fully_tagged(&marker_records(30, 1.0, 0.0, 2)), "");
    ws.run_ok(&["partition"]);
    let summary = ws.run_ok(&["evaluate", "--mode", "combos"]);
    assert_eq!(summary["entries"], 63);
    let csv = fs::read_to_string(ws.out("eval/combinations.csv")).unwrap();
    assert_eq!(csv.lines().count(), 64);
}

#[test]
fn imbalance_sweep_reports_each_ratio() {
    let ws = Workspace::new(
        &marker_records(200, 0.9, 0.1, 4),
        "[eval]\nratios = [0.2, 0.5, 0.8]",
    );
    ws.run_ok(&["partition"]);
    let summary = ws.run_ok(&["evaluate", "--mode", "imbalance"]);
    assert!(summary["summary_auc"].as_f64().unwrap() > 0.8);
    let csv = fs::read_to_string(ws.out("eval/imbalance.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn top_features_ranks_the_marker_first() {
    let ws = Workspace::new(&marker_records(100, 1.0, 1.0, 6), "");
    ws.run_ok(&["partition"]);
    let summary = ws.run_ok(&["top-features", "--k", "1000000"]);
    let top = summary["top"]["UNIGRAM"].as_array().unwrap();
    assert_eq!(top[0], "qz1");
    let csv = fs::read_to_string(ws.out("top_features.csv")).unwrap();
    assert_eq!(csv.lines().count(), top.len() + 1);
    assert_eq!(csv.lines().nth(1).unwrap().split(',').nth(2), Some("qz1"));
}

#[test]
fn cloud_shows_what_the_model_adds() {
    let mut records = marker_records(60, 1.0, 1.0, 9);
    records.retain(|r| r.get("geo").is_some());
    let ws = Workspace::new(&records, "");
    ws.run_ok(&["partition"]);
    ws.run_ok(&["train"]);

    // No unlabeled tweets → identical clouds.
    ws.run_ok(&["cloud"]);
    assert_eq!(
        fs::read(ws.out("cloud/geotagged.json")).unwrap(),
        fs::read(ws.out("cloud/combined.json")).unwrap()
    );

    let extra: Vec<_> = (0..50)
        .map(|i| tweet(&format!("h{i}"), "qz1 hoboken flooding", CRISIS_TIME, None))
        .collect();
    write_jsonl(&ws.path().join("extra.jsonl"), &extra);
    let summary = ws.run_ok(&["cloud", "--input", "extra.jsonl"]);
    assert_eq!(summary["classified_ir_added"], 50);
    let has = |file: &str| {
        let doc: serde_json::Value =
            serde_json::from_slice(&fs::read(ws.out(file)).unwrap()).unwrap();
        assert_eq!(doc["bigrams"].as_array().unwrap().len(), 10);
        doc["bigrams"]
            .as_array()
            .unwrap()
            .iter()
            .any(|e| e["bigram"] == "hoboken flooding")
    };
    assert!(!has("cloud/geotagged.json"));
    assert!(has("cloud/combined.json"));
}

#[test]
fn divergence_matrices() {
    let mut records = Vec::new();
    for i in 0..10 {
        let text = format!("same words every time {}", i % 3);
        records.push(tweet(&format!("b{i}"), &text, CRISIS_TIME, Some(BOSTON)));
        records.push(tweet(&format!("c{i}"), &text, CRISIS_TIME, Some(CHICAGO)));
    }
    let ws = Workspace::new(
        &records,
        "[divergence]\nday = \"2013-04-15\"\nstart_hour = 15\nend_hour = 17",
    );
    let summary = ws.run_ok(&["divergence", "--mode", "regional"]);
    assert_eq!(summary["groups"], json!(["boston", "chicago"]));
    let doc: serde_json::Value =
        serde_json::from_slice(&fs::read(ws.out("divergence/regional_crisis.json")).unwrap())
            .unwrap();
    assert_eq!(doc["values"], json!([[0.0, 0.0], [0.0, 0.0]]));
    let csv = fs::read_to_string(ws.out("divergence/regional_crisis.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("group,boston,chicago"));

    // Only the 16:00 hour (20:00 UTC) has tweets: a 1×1 matrix plus a warning.
    let summary = ws.run_ok(&["divergence", "--mode", "hourly"]);
    assert_eq!(summary["groups"], json!(["16:00"]));
    assert_eq!(summary["warnings"].as_array().unwrap().len(), 1);
    assert!(ws.out("divergence/hourly_normalized.csv").exists());
}

#[test]
fn tag_fills_missing_ark_layers() {
    let dir = tempfile::tempdir().unwrap();
    let mut tagged = tweet("t", "@bob look", CRISIS_TIME, None);
    tagged["ark_tags"] = json!(["@", "N"]);
    write_jsonl(
        &dir.path().join("in.jsonl"),
        &[tweet("u", "stay safe #boston", CRISIS_TIME, None), tagged],
    );
    let summary = run_ok(
        dir.path(),
        &["tag", "--input", "in.jsonl", "--output", "tagged.jsonl"],
    );
    assert_eq!(summary["filled"], 1);
    let out = read_jsonl(&dir.path().join("tagged.jsonl"));
    assert_eq!(out[0]["ark_tags"], json!(["V", "A", "#"]));
    assert_eq!(out[1]["ark_tags"], json!(["@", "N"]));
}

#[test]
fn features_emits_sparse_counts() {
    let dir = tempfile::tempdir().unwrap();
    write_jsonl(
        &dir.path().join("in.jsonl"),
        &[tweet("u", "help help me", CRISIS_TIME, None)],
    );
    run_ok(
        dir.path(),
        &[
            "features",
            "--input",
            "in.jsonl",
            "--output",
            "f.jsonl",
            "--classes",
            "UNIGRAM,BIGRAM",
        ],
    );
    let out = read_jsonl(&dir.path().join("f.jsonl"));
    assert_eq!(
        out[0],
        json!({"id": "u", "features": {
            "UNIGRAM:help": 2, "UNIGRAM:me": 1,
            "BIGRAM:help help": 1, "BIGRAM:help me": 1
        }})
    );
}

#[test]
fn bad_config_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "seed = 1\n").unwrap();
    let out = run(dir.path(), &["--config", "bad.toml", "partition"]);
    assert!(!out.status.success());
}
