#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use crisisloc::synth::marker_corpus;
use crisisloc::Label;
use serde_json::{json, Value};

pub const BOSTON: (f64, f64) = (42.36, -71.06);
pub const CHICAGO: (f64, f64) = (41.88, -87.63);
pub const CRISIS_TIME: &str = "2013-04-15T20:00:00Z";
pub const PRE_CRISIS_TIME: &str = "2013-04-15T12:00:00Z";

pub fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crisisloc"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

/// Run and require success; returns the stdout summary.
pub fn run_ok(dir: &Path, args: &[&str]) -> Value {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "crisisloc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("summary is JSON")
}

pub fn tweet(id: &str, text: &str, at: &str, geo: Option<(f64, f64)>) -> Value {
    let mut t = json!({ "id": id, "text": text, "created_at": at });
    if let Some((lat, lon)) = geo {
        t["geo"] = json!({ "lat": lat, "lon": lon });
    }
    t
}

pub fn write_jsonl(path: &Path, records: &[Value]) {
    let text: String = records.iter().map(|r| format!("{r}\n")).collect();
    fs::write(path, text).unwrap();
}

pub fn read_jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// Marker-token corpus: IR tweets inside the region during the crisis, OR
/// tweets in Chicago. Every IR tweet is also copied, without geo, into the
/// unlabeled pool.
pub fn marker_records(n: usize, ir_rate: f64, or_rate: f64, seed: u64) -> Vec<Value> {
    let mut out = Vec::new();
    for (i, (t, label)) in marker_corpus(n, ir_rate, or_rate, true, seed)
        .iter()
        .enumerate()
    {
        let text: Vec<&str> = t.tokens().iter().map(|t| t.as_str()).collect();
        let text = text.join(" ");
        let geo = if *label == Label::Ir { BOSTON } else { CHICAGO };
        out.push(tweet(&format!("g{i}"), &text, CRISIS_TIME, Some(geo)));
        if *label == Label::Ir {
            out.push(tweet(&format!("u{i}"), &text, CRISIS_TIME, None));
        }
    }
    out
}

/// Attach constant PTB and chunk layers so every feature class is extractable.
pub fn fully_tagged(records: &[Value]) -> Vec<Value> {
    records
        .iter()
        .map(|r| {
            let n = crisisloc::text::tokenize(r["text"].as_str().unwrap()).len();
            let mut r = r.clone();
            r["ptb_tags"] = json!(vec!["NN"; n]);
            r["chunk_tags"] = json!((0..n)
                .map(|i| if i == 0 { "B-NP" } else { "I-NP" })
                .collect::<Vec<_>>());
            r
        })
        .collect()
}

pub struct Workspace {
    pub dir: tempfile::TempDir,
}

impl Workspace {
    pub fn new(records: &[Value], extra_config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        write_jsonl(&dir.path().join("corpus.jsonl"), records);
        let config = format!(
            r#"seed = 11
timezone_offset_minutes = -240
corpus = "corpus.jsonl"
output_dir = "out"
{extra_config}

[region]
name = "boston"
lat = 42.35
lon = -71.08
radius_km = 19.0

[windows.crisis]
start = "2013-04-15T18:48:00Z"
end = "2013-04-16T04:00:00Z"

[windows.pre_crisis]
start = "2013-04-15T10:00:00Z"
end = "2013-04-15T18:48:00Z"

[[cities]]
name = "chicago"
lat = 41.88
lon = -87.63
radius_km = 20.0
"#
        );
        fs::write(dir.path().join("run.toml"), config).unwrap();
        Workspace { dir }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn out(&self, rel: &str) -> PathBuf {
        self.path().join("out").join(rel)
    }

    pub fn run(&self, args: &[&str]) -> Output {
        let mut full = vec!["--config", "run.toml"];
        full.extend(args);
        run(self.path(), &full)
    }

    pub fn run_ok(&self, args: &[&str]) -> Value {
        let mut full = vec!["--config", "run.toml"];
        full.extend(args);
        run_ok(self.path(), &full)
    }
}
