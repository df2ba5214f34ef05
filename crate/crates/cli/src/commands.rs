use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crisisloc::divergence::{hourly_divergence_matrix, regional_divergence_matrix, MatrixReport};
use crisisloc::eval::{
    balanced_sample, baseline_metrics, bigram_cloud, cross_validate, enumerate_combinations,
    imbalance_sweep, CvConfig, FeatureTable, Metrics,
};
use crisisloc::features::{extractable_classes, vectorize, MissingLayerPolicy};
use crisisloc::ingest::{load_corpus, parse_tweet_record, Corpus, PartitionLabel};
use crisisloc::model::{top_features, train_logreg, train_naive_bayes, ModelFile, TrainedModel};
use crisisloc::text::{fallback_ark_tag, tokenize, TaggedTweet};
use crisisloc::{ClassSet, Label, LabeledVector, RawTweet};

use crate::config::{ModelKind, RunConfig, WindowChoice};

pub const SCHEMA_VERSION: u32 = 1;

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    let file = File::create(path).with_context(|| format!("writing {}", path.display()))?;
    let mut out = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut out, &item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))
}

/// Strictly parsed JSON Lines tweets (files this tool wrote or the user
/// supplied as classification input).
fn read_tweets(path: &Path) -> Result<Vec<RawTweet>> {
    let file = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            parse_tweet_record(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?,
        );
    }
    Ok(out)
}

/// Tokenize and align tags; misaligned tweets are dropped with a warning.
fn prepare(
    raw: &[RawTweet],
    fallback: bool,
    warnings: &mut Vec<String>,
) -> Vec<Option<TaggedTweet>> {
    raw.iter()
        .map(|r| match TaggedTweet::from_raw(r) {
            Ok(t) if fallback => Some(t.with_fallback_ark()),
            Ok(t) => Some(t),
            Err(e) => {
                warnings.push(format!("skipped: {e}"));
                None
            }
        })
        .collect()
}

fn labeled_tweets(
    items: &[(RawTweet, Label)],
    fallback: bool,
    warnings: &mut Vec<String>,
) -> Vec<(TaggedTweet, Label)> {
    let raw: Vec<RawTweet> = items.iter().map(|(r, _)| r.clone()).collect();
    prepare(&raw, fallback, warnings)
        .into_iter()
        .zip(items)
        .filter_map(|(t, (_, l))| t.map(|t| (t, *l)))
        .collect()
}

struct LabeledPools {
    ir: Vec<RawTweet>,
    or: Vec<RawTweet>,
}

fn read_pools(config: &RunConfig) -> Result<LabeledPools> {
    let dir = config.partition_dir();
    let ir_path = dir.join("ir.jsonl");
    if !ir_path.exists() {
        bail!(
            "{} not found; run the `partition` command first",
            ir_path.display()
        );
    }
    Ok(LabeledPools {
        ir: read_tweets(&ir_path)?,
        or: read_tweets(&dir.join("or.jsonl"))?,
    })
}

/// Balanced IR/OR data unless balancing is turned off.
fn training_items(
    config: &RunConfig,
    pools: &LabeledPools,
    balance: bool,
    warnings: &mut Vec<String>,
) -> Result<Vec<(RawTweet, Label)>> {
    if pools.ir.is_empty() {
        bail!("the IR partition is empty");
    }
    if balance {
        let sample = balanced_sample(&pools.ir, &pools.or, config.seed)?;
        warnings.extend(sample.warnings);
        Ok(sample.items)
    } else {
        Ok(pools
            .ir
            .iter()
            .map(|t| (t.clone(), Label::Ir))
            .chain(pools.or.iter().map(|t| (t.clone(), Label::Or)))
            .collect())
    }
}

fn vectorize_all(
    data: &[(TaggedTweet, Label)],
    classes: ClassSet,
    warnings: &mut Vec<String>,
) -> Result<Vec<LabeledVector>> {
    let mut skipped = 0usize;
    let mut out = Vec::with_capacity(data.len());
    for (tweet, label) in data {
        let v = vectorize(tweet, classes, MissingLayerPolicy::Skip)?;
        if !v.skipped.is_empty() {
            skipped += 1;
        }
        out.push(LabeledVector::new(v.vector, *label));
    }
    if skipped > 0 {
        warnings.push(format!(
            "{skipped} of {} tweets lack a tag layer for some requested class",
            data.len()
        ));
    }
    Ok(out)
}

pub fn partition(config: &RunConfig) -> Result<Value> {
    let corpus = load_corpus(config.corpus_path()?, &config.scheme()?)
        .with_context(|| format!("loading {}", config.corpus_path().unwrap().display()))?;
    let dir = config.partition_dir();
    create_dir(&dir)?;
    for (label, name) in [
        (PartitionLabel::Ir, "ir"),
        (PartitionLabel::Or, "or"),
        (PartitionLabel::PcIr, "pc_ir"),
        (PartitionLabel::PcOr, "pc_or"),
    ] {
        write_jsonl(&dir.join(format!("{name}.jsonl")), corpus.group(label))?;
    }
    write_jsonl(&dir.join("unlabeled.jsonl"), &corpus.unlabeled)?;
    let warnings: Vec<String> = corpus
        .skipped
        .iter()
        .map(|s| format!("line {}: {}", s.line, s.reason))
        .collect();
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "counts": corpus.counts(),
        "warnings": warnings,
    });
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DivergenceMode {
    Hourly,
    Regional,
}

fn geotagged(corpus: &Corpus) -> Vec<RawTweet> {
    corpus.groups.values().flatten().cloned().collect()
}

pub fn divergence(config: &RunConfig, mode: DivergenceMode) -> Result<Value> {
    let corpus = load_corpus(config.corpus_path()?, &config.scheme()?)?;
    let (name, report): (String, MatrixReport) = match mode {
        DivergenceMode::Hourly => {
            let d = config
                .divergence
                .as_ref()
                .context("hourly mode needs a [divergence] section")?;
            let report = hourly_divergence_matrix(
                &geotagged(&corpus),
                &config.region.region()?,
                d.day,
                d.start_hour,
                d.end_hour,
                config.timezone_offset_minutes,
            )?;
            ("hourly".into(), report)
        }
        DivergenceMode::Regional => {
            let window = config
                .divergence
                .as_ref()
                .map_or(WindowChoice::Crisis, |d| d.regional_window);
            let (a, b, tag) = match window {
                WindowChoice::Crisis => (PartitionLabel::Ir, PartitionLabel::Or, "crisis"),
                WindowChoice::PreCrisis => {
                    if config.windows.pre_crisis.is_none() {
                        bail!("regional pre-crisis mode needs windows.pre_crisis");
                    }
                    (PartitionLabel::PcIr, PartitionLabel::PcOr, "pre_crisis")
                }
            };
            let regions = std::iter::once(&config.region)
                .chain(&config.cities)
                .map(|r| Ok((r.name.clone(), r.region()?)))
                .collect::<Result<Vec<_>>>()?;
            let mut groups: Vec<(String, Vec<Vec<crisisloc::Token>>)> = regions
                .iter()
                .map(|(n, _)| (n.clone(), Vec::new()))
                .collect();
            for tweet in corpus.group(a).iter().chain(corpus.group(b)) {
                let geo = tweet
                    .geo
                    .as_ref()
                    .expect("partitioned tweets are geotagged");
                if let Some(i) = regions.iter().position(|(_, r)| r.contains(geo)) {
                    groups[i].1.push(tokenize(&tweet.text));
                }
            }
            (
                format!("regional_{tag}"),
                regional_divergence_matrix(&groups)?,
            )
        }
    };
    let dir = config.output_dir.join("divergence");
    write_text(
        &dir.join(format!("{name}.csv")),
        &report.matrix.to_csv(false),
    )?;
    write_text(
        &dir.join(format!("{name}_normalized.csv")),
        &report.matrix.to_csv(true),
    )?;
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "labels": report.matrix.labels,
        "values": report.matrix.values,
        "normalized_values": report.matrix.normalized_values,
        "warnings": report.warnings,
    });
    write_json(&dir.join(format!("{name}.json")), &doc)?;
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "matrix": name,
        "groups": report.matrix.labels,
        "warnings": report.warnings,
    }))
}

pub fn train(config: &RunConfig, no_balance: bool) -> Result<Value> {
    let pools = read_pools(config)?;
    let mut warnings = Vec::new();
    let balance = config.model.balance && !no_balance;
    let items = training_items(config, &pools, balance, &mut warnings)?;
    let data = labeled_tweets(&items, config.fallback_tagging, &mut warnings);
    let classes = config.class_set();
    let vectors = vectorize_all(&data, classes, &mut warnings)?;
    let model = match config.model.kind {
        ModelKind::Nb => TrainedModel::NaiveBayes(train_naive_bayes(&vectors, config.model.alpha)?),
        ModelKind::Logreg => {
            TrainedModel::LogisticRegression(train_logreg(&vectors, config.model.logreg)?)
        }
    };
    let vocabulary_size = match &model {
        TrainedModel::NaiveBayes(m) => m.vocabulary_size(),
        TrainedModel::LogisticRegression(m) => m.weights.len(),
    };
    let file = ModelFile::new(classes, model);
    let path = config.output_dir.join("model.json");
    let mut text = file.to_json()?;
    text.push('\n');
    write_text(&path, &text)?;
    let ir = vectors.iter().filter(|v| v.label == Label::Ir).count();
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "model": path,
        "kind": config.model.kind_name(),
        "classes": classes,
        "vocabulary_size": vocabulary_size,
        "class_counts": { "IR": ir, "OR": vectors.len() - ir },
        "balanced": balance,
        "seed": config.seed,
        "warnings": warnings,
    });
    write_json(&config.output_dir.join("train_summary.json"), &summary)?;
    Ok(summary)
}

impl crate::config::ModelConfig {
    fn kind_name(&self) -> &'static str {
        match self.kind {
            ModelKind::Nb => "nb",
            ModelKind::Logreg => "logreg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EvaluateMode {
    Single,
    Combos,
    Imbalance,
}

fn metrics_record(m: &Metrics) -> [String; 7] {
    [
        format!("{:.6}", m.accuracy),
        format!("{:.6}", m.precision),
        format!("{:.6}", m.recall),
        format!("{:.6}", m.f1),
        m.degenerate.precision.to_string(),
        m.degenerate.recall.to_string(),
        m.degenerate.f1.to_string(),
    ]
}

const METRIC_HEADERS: [&str; 7] = [
    "accuracy",
    "precision",
    "recall",
    "f1",
    "degenerate_precision",
    "degenerate_recall",
    "degenerate_f1",
];

pub fn evaluate(config: &RunConfig, mode: EvaluateMode) -> Result<Value> {
    let pools = read_pools(config)?;
    let mut warnings = Vec::new();
    let cv = CvConfig {
        repeats: config.eval.repeats,
        folds: config.eval.folds,
        seed: config.seed,
        alpha: config.model.alpha,
    };
    let classes = config.class_set();
    let dir = config.output_dir.join("eval");
    let balance = mode != EvaluateMode::Imbalance;
    let items = training_items(config, &pools, balance, &mut warnings)?;
    let data = labeled_tweets(&items, config.fallback_tagging, &mut warnings);
    let table = FeatureTable::build(&data);

    let summary = match mode {
        EvaluateMode::Single => {
            let report = cross_validate(&table, classes, &cv)?;
            let baseline = baseline_metrics(table.labels())?;
            let mut w = csv_writer(&dir.join("cv_readings.csv"))?;
            let mut header = vec!["repeat", "fold"];
            header.extend(METRIC_HEADERS);
            w.write_record(&header)?;
            for r in &report.readings {
                let mut row = vec![r.repeat.to_string(), r.fold.to_string()];
                row.extend(metrics_record(&r.metrics));
                w.write_record(&row)?;
            }
            w.flush()?;
            let doc = json!({
                "schema_version": SCHEMA_VERSION,
                "classes": classes,
                "report": report,
                "baseline": baseline,
                "warnings": warnings,
            });
            write_json(&dir.join("cv_report.json"), &doc)?;
            json!({
                "schema_version": SCHEMA_VERSION,
                "mode": "single",
                "readings": report.readings.len(),
                "mean": report.mean,
                "baseline": baseline,
                "warnings": warnings,
            })
        }
        EvaluateMode::Combos => {
            let report = enumerate_combinations(&table, &cv)?;
            if !report.excluded.is_empty() {
                warnings.push(format!(
                    "classes excluded for missing tag layers: {}",
                    report
                        .excluded
                        .iter()
                        .map(|c| c.as_str())
                        .collect::<Vec<_>>()
                        .join(", ")
                ));
            }
            let mut w = csv_writer(&dir.join("combinations.csv"))?;
            let mut header = vec!["rank", "classes"];
            header.extend(METRIC_HEADERS);
            w.write_record(&header)?;
            for (i, e) in report.entries.iter().enumerate() {
                let mut row = vec![(i + 1).to_string(), e.classes.to_string()];
                row.extend(metrics_record(&e.report.mean));
                w.write_record(&row)?;
            }
            w.flush()?;
            let doc = json!({
                "schema_version": SCHEMA_VERSION,
                "report": report,
                "warnings": warnings,
            });
            write_json(&dir.join("combinations.json"), &doc)?;
            json!({
                "schema_version": SCHEMA_VERSION,
                "mode": "combos",
                "entries": report.entries.len(),
                "best": report.entries.first().map(|e| e.classes.to_string()),
                "warnings": warnings,
            })
        }
        EvaluateMode::Imbalance => {
            let sweep = imbalance_sweep(
                &table,
                classes,
                &config.eval.ratios,
                config.eval.folds,
                config.seed,
                config.model.alpha,
            )?;
            let mut w = csv_writer(&dir.join("imbalance.csv"))?;
            w.write_record(["ratio", "n_ir", "n_or", "auc"])?;
            for r in &sweep.results {
                w.write_record([
                    r.ratio.to_string(),
                    r.n_ir.to_string(),
                    r.n_or.to_string(),
                    format!("{:.6}", r.auc),
                ])?;
            }
            w.flush()?;
            let doc = json!({
                "schema_version": SCHEMA_VERSION,
                "sweep": sweep,
                "warnings": warnings,
            });
            write_json(&dir.join("imbalance.json"), &doc)?;
            json!({
                "schema_version": SCHEMA_VERSION,
                "mode": "imbalance",
                "summary_auc": sweep.summary_auc,
                "warnings": warnings,
            })
        }
    };
    Ok(summary)
}

fn load_model(path: &Path) -> Result<ModelFile> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ModelFile::from_json(&text).with_context(|| format!("loading model {}", path.display()))
}

#[derive(Serialize)]
struct Classified<'a> {
    id: &'a str,
    label: Label,
    score: f64,
}

/// Predictions for `raw`, in order; `None` for tweets that failed alignment.
fn classify_tweets(
    model: &ModelFile,
    raw: &[RawTweet],
    fallback: bool,
    warnings: &mut Vec<String>,
) -> Result<Vec<Option<(TaggedTweet, crisisloc::Prediction)>>> {
    prepare(raw, fallback, warnings)
        .into_iter()
        .map(|t| {
            let Some(tweet) = t else { return Ok(None) };
            let available = extractable_classes(&tweet, model.classes);
            if available != model.classes {
                let missing: Vec<_> = model
                    .classes
                    .iter()
                    .filter(|c| !available.contains(*c))
                    .map(|c| c.as_str())
                    .collect();
                bail!(
                    "tweet {}: model uses {} but the tweet lacks the tag layers for {}",
                    tweet.id(),
                    model.classes,
                    missing.join(", ")
                );
            }
            let v = vectorize(&tweet, model.classes, MissingLayerPolicy::Error)?;
            let prediction = model.model.predict(&v.vector);
            Ok(Some((tweet, prediction)))
        })
        .collect()
}

pub fn classify(
    config: &RunConfig,
    model_path: Option<PathBuf>,
    input: Option<PathBuf>,
) -> Result<Value> {
    let model_path = model_path.unwrap_or_else(|| config.output_dir.join("model.json"));
    let input = input.unwrap_or_else(|| config.partition_dir().join("unlabeled.jsonl"));
    let model = load_model(&model_path)?;
    let raw = read_tweets(&input)?;
    let mut warnings = Vec::new();
    let results = classify_tweets(&model, &raw, config.fallback_tagging, &mut warnings)?;
    let records: Vec<Classified> = results
        .iter()
        .flatten()
        .map(|(t, p)| Classified {
            id: t.id(),
            label: p.label,
            score: p.score,
        })
        .collect();
    let dir = config.output_dir.join("classify");
    write_jsonl(&dir.join("classified.jsonl"), &records)?;
    let ir = records.iter().filter(|r| r.label == Label::Ir).count();
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "input": input,
        "classified": records.len(),
        "classified_ir": ir,
        "classified_or": records.len() - ir,
        "warnings": warnings,
    });
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

pub fn top_features_cmd(config: &RunConfig, k: usize) -> Result<Value> {
    let pools = read_pools(config)?;
    let mut warnings = Vec::new();
    let items = training_items(config, &pools, config.model.balance, &mut warnings)?;
    let data = labeled_tweets(&items, config.fallback_tagging, &mut warnings);
    let classes = config.class_set();
    let vectors = vectorize_all(&data, classes, &mut warnings)?;
    let model = train_logreg(&vectors, config.model.logreg)?;
    if !model.converged {
        warnings.push(format!(
            "logistic regression stopped after {} epochs without converging",
            model.epochs_run
        ));
    }
    let path = config.output_dir.join("top_features.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["class", "rank", "feature", "weight"])?;
    let mut per_class = serde_json::Map::new();
    for class in classes.iter() {
        let ranked = top_features(&model, k, class)?;
        for (i, (id, weight)) in ranked.iter().enumerate() {
            w.write_record([
                class.as_str().to_string(),
                (i + 1).to_string(),
                id.key.clone(),
                format!("{weight:.6}"),
            ])?;
        }
        per_class.insert(
            class.as_str().to_string(),
            json!(ranked
                .iter()
                .map(|(id, _)| id.key.clone())
                .collect::<Vec<_>>()),
        );
    }
    w.flush()?;
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "output": path,
        "top": per_class,
        "warnings": warnings,
    }))
}

pub fn cloud(
    config: &RunConfig,
    model_path: Option<PathBuf>,
    input: Option<PathBuf>,
    k: usize,
) -> Result<Value> {
    let model_path = model_path.unwrap_or_else(|| config.output_dir.join("model.json"));
    let input = input.unwrap_or_else(|| config.partition_dir().join("unlabeled.jsonl"));
    let model = load_model(&model_path)?;
    let ir = read_tweets(&config.partition_dir().join("ir.jsonl"))?;
    let unlabeled = read_tweets(&input)?;
    let mut warnings = Vec::new();

    let geotagged: Vec<Vec<crisisloc::Token>> = ir.iter().map(|t| tokenize(&t.text)).collect();
    let mut combined = geotagged.clone();
    let mut added = 0usize;
    for (tweet, prediction) in
        classify_tweets(&model, &unlabeled, config.fallback_tagging, &mut warnings)?
            .into_iter()
            .flatten()
    {
        if prediction.label == Label::Ir {
            combined.push(tweet.tokens().to_vec());
            added += 1;
        }
    }
    let dir = config.output_dir.join("cloud");
    for (name, tweets) in [("geotagged", &geotagged), ("combined", &combined)] {
        let entries = bigram_cloud(tweets, k)?;
        write_json(
            &dir.join(format!("{name}.json")),
            &json!({ "schema_version": SCHEMA_VERSION, "bigrams": entries }),
        )?;
    }
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "geotagged_tweets": geotagged.len(),
        "classified_ir_added": added,
        "warnings": warnings,
    }))
}

/// Re-emit a corpus with the fallback ARK layer filled in where absent.
pub fn tag(input: &Path, output: &Path) -> Result<Value> {
    let file = File::open(input).with_context(|| format!("reading {}", input.display()))?;
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    let mut filled = 0usize;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_tweet_record(&line) {
            Ok(mut t) => {
                if t.ark_tags.is_none() {
                    t.ark_tags = Some(fallback_ark_tag(&tokenize(&t.text)));
                    filled += 1;
                }
                records.push(t);
            }
            Err(e) => warnings.push(format!("line {}: {e}", i + 1)),
        }
    }
    write_jsonl(output, &records)?;
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "output": output,
        "records": records.len(),
        "filled": filled,
        "warnings": warnings,
    }))
}

pub fn features(input: &Path, output: &Path, classes: ClassSet, fallback: bool) -> Result<Value> {
    let raw = read_tweets(input)?;
    let mut warnings = Vec::new();
    let mut records = Vec::new();
    for tweet in prepare(&raw, fallback, &mut warnings).into_iter().flatten() {
        let v = vectorize(&tweet, classes, MissingLayerPolicy::Skip)?;
        if !v.skipped.is_empty() {
            warnings.push(format!(
                "tweet {}: skipped {}",
                tweet.id(),
                v.skipped
                    .iter()
                    .map(|c| c.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            ));
        }
        records.push(json!({ "id": tweet.id(), "features": v.vector }));
    }
    write_jsonl(output, &records)?;
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "output": output,
        "records": records.len(),
        "warnings": warnings,
    }))
}
