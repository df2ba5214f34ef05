//! Experimental protocol: balanced sampling, repeated stratified
//! cross-validation, IR-perspective metrics, ROC AUC under class imbalance
//! and the exhaustive feature-class combination search.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::features::{extract_class, ClassSet, FeatureClass, FeatureError, FeatureVector};
use crate::model::{train_naive_bayes, Label, LabeledVector, ModelError, DEFAULT_ALPHA};
use crate::text::{TaggedTweet, Token};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("predictions ({0}) and truth ({1}) differ in length")]
    LengthMismatch(usize, usize),
    #[error("no instances to evaluate")]
    Empty,
    #[error("the IR set is empty")]
    EmptyIr,
    #[error("only {0} labels present; both IR and OR are required")]
    SingleClass(Label),
    #[error(
        "{label} has {count} instances; at least 2 are needed so every training split contains it"
    )]
    TooFewForFolds { label: Label, count: usize },
    #[error("{instances} instances cannot be split into {folds} folds")]
    TooFewInstances { instances: usize, folds: usize },
    #[error(
        "fold and repeat counts must be at least 2 and 1, got folds={folds} repeats={repeats}"
    )]
    InvalidProtocol { folds: usize, repeats: usize },
    #[error("IR ratio {0} must lie strictly between 0 and 1")]
    InvalidRatio(f64),
    #[error(
        "ratio {ratio} infeasible: pools of {ir} IR and {or} OR yield {n_ir} IR and {n_or} OR"
    )]
    InfeasibleRatio {
        ratio: f64,
        ir: usize,
        or: usize,
        n_ir: usize,
        n_or: usize,
    },
    #[error("score {0} is not a number")]
    NanScore(usize),
    #[error("k must be positive")]
    InvalidK,
    #[error("no feature classes are extractable from this data")]
    NoClasses,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct DegenerateFlags {
    /// No instance was predicted IR.
    pub precision: bool,
    /// No instance is truly IR.
    pub recall: bool,
    /// Precision and recall are both zero.
    pub f1: bool,
}

impl DegenerateFlags {
    pub fn any(&self) -> bool {
        self.precision || self.recall || self.f1
    }
}

/// Confusion-matrix metrics with IR as the positive class. Undefined ratios
/// are reported as 0 and flagged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub degenerate: DegenerateFlags,
}

pub fn compute_metrics(predictions: &[Label], truth: &[Label]) -> Result<Metrics, EvalError> {
    if predictions.len() != truth.len() {
        return Err(EvalError::LengthMismatch(predictions.len(), truth.len()));
    }
    if truth.is_empty() {
        return Err(EvalError::Empty);
    }
    let (mut tp, mut fp, mut fneg, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (p, t) in predictions.iter().zip(truth) {
        match (p, t) {
            (Label::Ir, Label::Ir) => tp += 1,
            (Label::Ir, Label::Or) => fp += 1,
            (Label::Or, Label::Ir) => fneg += 1,
            (Label::Or, Label::Or) => tn += 1,
        }
    }
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fneg);
    let f1_den = precision + recall;
    let f1 = if f1_den > 0.0 {
        2.0 * precision * recall / f1_den
    } else {
        0.0
    };
    Ok(Metrics {
        accuracy: ratio(tp + tn, truth.len()),
        precision,
        recall,
        f1,
        degenerate: DegenerateFlags {
            precision: tp + fp == 0,
            recall: tp + fneg == 0,
            f1: f1_den == 0.0,
        },
    })
}

impl Metrics {
    /// Arithmetic mean of each metric; a flag is set if any reading set it.
    pub fn mean(readings: &[Metrics]) -> Metrics {
        let n = readings.len() as f64;
        let avg = |f: fn(&Metrics) -> f64| readings.iter().map(f).sum::<f64>() / n;
        Metrics {
            accuracy: avg(|m| m.accuracy),
            precision: avg(|m| m.precision),
            recall: avg(|m| m.recall),
            f1: avg(|m| m.f1),
            degenerate: DegenerateFlags {
                precision: readings.iter().any(|m| m.degenerate.precision),
                recall: readings.iter().any(|m| m.degenerate.recall),
                f1: readings.iter().any(|m| m.degenerate.f1),
            },
        }
    }
}

/// Rank-based ROC AUC: the probability that a random IR instance scores
/// above a random OR instance, ties counting one half.
pub fn roc_auc(scores: &[f64], truth: &[Label]) -> Result<f64, EvalError> {
    if scores.len() != truth.len() {
        return Err(EvalError::LengthMismatch(scores.len(), truth.len()));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(EvalError::NanScore(i));
    }
    let n_pos = truth.iter().filter(|l| **l == Label::Ir).count();
    let n_neg = truth.len() - n_pos;
    if n_pos == 0 {
        return Err(EvalError::SingleClass(Label::Or));
    }
    if n_neg == 0 {
        return Err(EvalError::SingleClass(Label::Ir));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of doubled (1-based) average ranks of positives keeps the
    // arithmetic in integers until the final division.
    let mut doubled_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // positions i+1 ..= j share average rank (i + 1 + j) / 2
        let doubled_rank = (i + 1 + j) as u128;
        let positives = order[i..j]
            .iter()
            .filter(|&&k| truth[k] == Label::Ir)
            .count() as u128;
        doubled_rank_sum += doubled_rank * positives;
        i = j;
    }
    let n_pos = n_pos as u128;
    let doubled_u = doubled_rank_sum - n_pos * (n_pos + 1);
    Ok(doubled_u as f64 / (2 * n_pos * n_neg as u128) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalancedSample<T> {
    pub items: Vec<(T, Label)>,
    pub warnings: Vec<String>,
}

/// All of the smaller class plus an equal-size uniform sample (without
/// replacement) of the larger one. Normally OR is downsampled; if the OR
/// pool is smaller than IR, IR is downsampled instead. Deterministic per
/// seed; sampled items keep their input order, IR first.
pub fn balanced_sample<T: Clone>(
    ir: &[T],
    or_pool: &[T],
    seed: u64,
) -> Result<BalancedSample<T>, EvalError> {
    if ir.is_empty() {
        return Err(EvalError::EmptyIr);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut warnings = Vec::new();
    let pick = |pool: &[T], n: usize, rng: &mut ChaCha8Rng| -> Vec<T> {
        let mut idx = rand::seq::index::sample(rng, pool.len(), n).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| pool[i].clone()).collect()
    };
    let (ir_items, or_items) = if or_pool.len() >= ir.len() {
        (ir.to_vec(), pick(or_pool, ir.len(), &mut rng))
    } else {
        let w = format!(
            "OR pool ({}) smaller than IR ({}); downsampling IR instead",
            or_pool.len(),
            ir.len()
        );
        log::warn!("{w}");
        warnings.push(w);
        (pick(ir, or_pool.len(), &mut rng), or_pool.to_vec())
    };
    let items = ir_items
        .into_iter()
        .map(|t| (t, Label::Ir))
        .chain(or_items.into_iter().map(|t| (t, Label::Or)))
        .collect();
    Ok(BalancedSample { items, warnings })
}

/// Per-class feature vectors for a labeled tweet set, computed once and
/// reused across class subsets. A class whose tag layer is missing on a
/// tweet contributes nothing for that tweet.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    rows: Vec<[Option<FeatureVector>; 6]>,
    labels: Vec<Label>,
}

impl FeatureTable {
    pub fn build(data: &[(TaggedTweet, Label)]) -> Self {
        let rows = data
            .par_iter()
            .map(|(tweet, _)| {
                FeatureClass::ALL.map(|class| match extract_class(tweet, class) {
                    Ok(v) => Some(v),
                    Err(FeatureError::LayerAbsent { .. }) => None,
                    Err(e) => unreachable!("class extraction failed: {e}"),
                })
            })
            .collect();
        FeatureTable {
            rows,
            labels: data.iter().map(|(_, l)| *l).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    /// Classes extractable on every row.
    pub fn available_classes(&self) -> ClassSet {
        FeatureClass::ALL
            .into_iter()
            .filter(|c| self.rows.iter().all(|r| r[*c as usize].is_some()))
            .collect()
    }

    pub fn vector(&self, row: usize, classes: ClassSet) -> FeatureVector {
        let mut v = FeatureVector::new();
        for class in classes.iter() {
            if let Some(part) = &self.rows[row][class as usize] {
                v.merge(part);
            }
        }
        v
    }

    pub fn labeled_vectors(&self, classes: ClassSet) -> Vec<LabeledVector> {
        (0..self.len())
            .map(|i| LabeledVector::new(self.vector(i, classes), self.labels[i]))
            .collect()
    }

    /// Sub-table of the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> FeatureTable {
        FeatureTable {
            rows: rows.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CvConfig {
    pub repeats: usize,
    pub folds: usize,
    pub seed: u64,
    pub alpha: f64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            repeats: 3,
            folds: 5,
            seed: 0,
            alpha: DEFAULT_ALPHA,
        }
    }
}

/// Splits instance indices into `folds` stratified test folds. Each label's
/// indices are shuffled (one RNG seeded with `seed`, IR first) and dealt
/// round-robin, continuing across labels so fold sizes differ by at most one.
/// Every fold is returned sorted.
pub fn stratified_folds(
    labels: &[Label],
    folds: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, EvalError> {
    if folds < 2 {
        return Err(EvalError::InvalidProtocol { folds, repeats: 1 });
    }
    if labels.len() < folds {
        return Err(EvalError::TooFewInstances {
            instances: labels.len(),
            folds,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Vec::new(); folds];
    let mut next = 0;
    for label in [Label::Ir, Label::Or] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        if idx.len() < 2 {
            return Err(EvalError::TooFewForFolds {
                label,
                count: idx.len(),
            });
        }
        idx.shuffle(&mut rng);
        for i in idx {
            out[next].push(i);
            next = (next + 1) % folds;
        }
    }
    for fold in &mut out {
        fold.sort_unstable();
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reading {
    pub repeat: usize,
    pub fold: usize,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub seed: u64,
    pub repeats: usize,
    pub folds: usize,
    pub readings: Vec<Reading>,
    pub mean: Metrics,
}

/// Train on everything outside `test`, score the rows in `test`.
fn fold_scores(data: &[LabeledVector], test: &[usize], alpha: f64) -> Result<Vec<f64>, EvalError> {
    let mut in_test = vec![false; data.len()];
    for &i in test {
        in_test[i] = true;
    }
    let train: Vec<LabeledVector> = data
        .iter()
        .zip(&in_test)
        .filter(|(_, t)| !**t)
        .map(|(d, _)| d.clone())
        .collect();
    let model = train_naive_bayes(&train, alpha)?;
    Ok(test.iter().map(|&i| model.score(&data[i].vector)).collect())
}

/// Repeated stratified k-fold cross-validation of Naive Bayes. Repeat `r`
/// shuffles with seed `config.seed + r`.
pub fn cross_validate_vectors(
    data: &[LabeledVector],
    config: &CvConfig,
) -> Result<CvReport, EvalError> {
    if config.repeats < 1 || config.folds < 2 {
        return Err(EvalError::InvalidProtocol {
            folds: config.folds,
            repeats: config.repeats,
        });
    }
    let labels: Vec<Label> = data.iter().map(|d| d.label).collect();
    let mut tasks = Vec::new();
    for repeat in 0..config.repeats {
        let folds = stratified_folds(
            &labels,
            config.folds,
            config.seed.wrapping_add(repeat as u64),
        )?;
        for (fold, test) in folds.into_iter().enumerate() {
            tasks.push((repeat, fold, test));
        }
    }
    let readings = tasks
        .par_iter()
        .map(|(repeat, fold, test)| {
            let scores = fold_scores(data, test, config.alpha)?;
            let predicted: Vec<Label> = scores
                .iter()
                .map(|&s| if s >= 0.0 { Label::Ir } else { Label::Or })
                .collect();
            let truth: Vec<Label> = test.iter().map(|&i| labels[i]).collect();
            Ok(Reading {
                repeat: *repeat,
                fold: *fold,
                metrics: compute_metrics(&predicted, &truth)?,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    let mean = Metrics::mean(&readings.iter().map(|r| r.metrics).collect::<Vec<_>>());
    Ok(CvReport {
        seed: config.seed,
        repeats: config.repeats,
        folds: config.folds,
        readings,
        mean,
    })
}

pub fn cross_validate(
    table: &FeatureTable,
    classes: ClassSet,
    config: &CvConfig,
) -> Result<CvReport, EvalError> {
    if classes.is_empty() {
        return Err(EvalError::NoClasses);
    }
    cross_validate_vectors(&table.labeled_vectors(classes), config)
}

/// Metrics of the select-all baseline against `truth`.
pub fn baseline_metrics(truth: &[Label]) -> Result<Metrics, EvalError> {
    compute_metrics(&vec![Label::Ir; truth.len()], truth)
}

pub const DEFAULT_RATIOS: [f64; 9] = [0.05, 0.1, 0.2, 0.35, 0.5, 0.65, 0.8, 0.9, 0.95];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioResult {
    pub ratio: f64,
    pub n_ir: usize,
    pub n_or: usize,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImbalanceSweep {
    pub classes: ClassSet,
    pub seed: u64,
    pub results: Vec<RatioResult>,
    pub summary_auc: f64,
}

/// Largest `(n_ir, n_or)` with IR fraction `ratio` that the pools allow.
fn sizes_for_ratio(ratio: f64, ir: usize, or: usize) -> (usize, usize) {
    let total = (ir as f64 / ratio).min(or as f64 / (1.0 - ratio)).floor();
    let n_ir = ((total * ratio).round() as usize).min(ir);
    let n_or = ((total - n_ir as f64).max(0.0) as usize).min(or);
    (n_ir, n_or)
}

/// For each IR fraction, subsample the labeled table to that fraction,
/// score every instance out-of-fold with stratified `folds`-fold Naive
/// Bayes, and compute ROC AUC over the pooled scores. Ratio `k` uses seed
/// `seed + k`.
pub fn imbalance_sweep(
    table: &FeatureTable,
    classes: ClassSet,
    ratios: &[f64],
    folds: usize,
    seed: u64,
    alpha: f64,
) -> Result<ImbalanceSweep, EvalError> {
    if classes.is_empty() {
        return Err(EvalError::NoClasses);
    }
    let ir_rows: Vec<usize> = (0..table.len())
        .filter(|&i| table.labels[i] == Label::Ir)
        .collect();
    let or_rows: Vec<usize> = (0..table.len())
        .filter(|&i| table.labels[i] == Label::Or)
        .collect();
    let results = ratios
        .par_iter()
        .enumerate()
        .map(|(k, &ratio)| {
            if !(ratio > 0.0 && ratio < 1.0) {
                return Err(EvalError::InvalidRatio(ratio));
            }
            let (n_ir, n_or) = sizes_for_ratio(ratio, ir_rows.len(), or_rows.len());
            if n_ir < 2 || n_or < 2 || n_ir + n_or < folds {
                return Err(EvalError::InfeasibleRatio {
                    ratio,
                    ir: ir_rows.len(),
                    or: or_rows.len(),
                    n_ir,
                    n_or,
                });
            }
            let ratio_seed = seed.wrapping_add(k as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(ratio_seed);
            let mut rows: Vec<usize> = ir_rows.choose_multiple(&mut rng, n_ir).copied().collect();
            rows.extend(or_rows.choose_multiple(&mut rng, n_or).copied());
            let data = table.select(&rows).labeled_vectors(classes);
            let labels: Vec<Label> = data.iter().map(|d| d.label).collect();
            let mut scores = vec![0.0; data.len()];
            for test in stratified_folds(&labels, folds, ratio_seed)? {
                for (i, s) in test.iter().zip(fold_scores(&data, &test, alpha)?) {
                    scores[*i] = s;
                }
            }
            Ok(RatioResult {
                ratio,
                n_ir,
                n_or,
                auc: roc_auc(&scores, &labels)?,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    let summary_auc = if results.is_empty() {
        0.0
    } else {
        results.iter().map(|r| r.auc).sum::<f64>() / results.len() as f64
    };
    Ok(ImbalanceSweep {
        classes,
        seed,
        results,
        summary_auc,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CombinationEntry {
    pub classes: ClassSet,
    pub report: CvReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CombinationReport {
    /// Ranked by mean F1, descending; equal scores keep lattice order.
    pub entries: Vec<CombinationEntry>,
    pub available: ClassSet,
    /// Classes left out because some instance lacks their tag layer.
    pub excluded: Vec<FeatureClass>,
}

/// Cross-validates every non-empty subset of the extractable classes with
/// the same configuration, so all subsets see identical folds.
pub fn enumerate_combinations(
    table: &FeatureTable,
    config: &CvConfig,
) -> Result<CombinationReport, EvalError> {
    let available = table.available_classes();
    if available.is_empty() {
        return Err(EvalError::NoClasses);
    }
    let excluded: Vec<FeatureClass> = FeatureClass::ALL
        .into_iter()
        .filter(|c| !available.contains(*c))
        .collect();
    let mut entries = available
        .non_empty_subsets()
        .into_par_iter()
        .map(|classes| {
            Ok(CombinationEntry {
                classes,
                report: cross_validate(table, classes, config)?,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    entries.sort_by(|a, b| b.report.mean.f1.total_cmp(&a.report.mean.f1));
    Ok(CombinationReport {
        entries,
        available,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CloudEntry {
    pub bigram: String,
    pub count: u64,
}

/// The `k` most frequent word bigrams, ties broken lexicographically.
pub fn bigram_cloud<T: AsRef<[Token]>>(
    tweets: &[T],
    k: usize,
) -> Result<Vec<CloudEntry>, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for tweet in tweets {
        for pair in tweet.as_ref().windows(2) {
            *counts
                .entry(format!("{} {}", pair[0], pair[1]))
                .or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<CloudEntry> = counts
        .into_iter()
        .map(|(bigram, count)| CloudEntry { bigram, count })
        .collect();
    // stable sort keeps the BTreeMap's lexicographic order among ties
    ranked.sort_by_key(|e| std::cmp::Reverse(e.count));
    ranked.truncate(k);
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureId;
    use crate::text::tokenize;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use Label::{Ir, Or};

    #[test]
    fn metrics_examples() {
        let truth = [Ir, Ir, Or, Or];
        let m = compute_metrics(&[Ir; 4], &truth).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall), (0.5, 0.5, 1.0));
        assert_relative_eq!(m.f1, 2.0 / 3.0, epsilon = 1e-15);
        assert!(!m.degenerate.any());

        let perfect = compute_metrics(&truth, &truth).unwrap();
        assert_eq!(
            (
                perfect.accuracy,
                perfect.precision,
                perfect.recall,
                perfect.f1
            ),
            (1.0, 1.0, 1.0, 1.0)
        );

        let none = compute_metrics(&[Or; 4], &truth).unwrap();
        assert_eq!((none.precision, none.recall, none.f1), (0.0, 0.0, 0.0));
        assert!(none.degenerate.precision && !none.degenerate.recall && none.degenerate.f1);

        assert!(matches!(
            compute_metrics(&[Ir], &truth),
            Err(EvalError::LengthMismatch(1, 4))
        ));
        assert!(matches!(compute_metrics(&[], &[]), Err(EvalError::Empty)));
    }

    #[test]
    fn baseline_on_all_or_is_flagged() {
        let m = baseline_metrics(&[Or, Or, Or]).unwrap();
        assert_eq!((m.precision, m.recall), (0.0, 0.0));
        assert!(m.degenerate.recall);
    }

    #[test]
    fn metrics_single_instance_cases() {
        for p in [Ir, Or] {
            for t in [Ir, Or] {
                let m = compute_metrics(&[p], &[t]).unwrap();
                let tp = (p == Ir && t == Ir) as usize as f64;
                assert_eq!(m.accuracy, if p == t { 1.0 } else { 0.0 });
                assert_eq!(m.precision, if p == Ir { tp } else { 0.0 });
                assert_eq!(m.recall, if t == Ir { tp } else { 0.0 });
                assert_eq!(m.degenerate.precision, p == Or);
                assert_eq!(m.degenerate.recall, t == Or);
            }
        }
    }

    #[test]
    fn auc_examples() {
        let truth = [Ir, Ir, Or, Or];
        assert_eq!(roc_auc(&[0.9, 0.8, 0.1, 0.2], &truth).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.1, 0.2, 0.9, 0.8], &truth).unwrap(), 0.0);
        assert_eq!(roc_auc(&[0.5; 4], &truth).unwrap(), 0.5);
        assert_eq!(roc_auc(&[f64::INFINITY; 4], &truth).unwrap(), 0.5);
        assert!(roc_auc(&[0.1, 0.2], &[Ir, Ir]).is_err());
        assert!(roc_auc(&[f64::NAN, 0.2], &[Ir, Or]).is_err());
    }

    #[test]
    fn balanced_sample_examples() {
        let ir: Vec<u32> = (0..5).collect();
        let or: Vec<u32> = (100..200).collect();
        let s = balanced_sample(&ir, &or, 7).unwrap();
        assert_eq!(s.items.len(), 10);
        assert_eq!(s.items.iter().filter(|(_, l)| *l == Ir).count(), 5);
        assert_eq!(s, balanced_sample(&ir, &or, 7).unwrap());
        assert_ne!(s, balanced_sample(&ir, &or, 8).unwrap());
        assert!(matches!(
            balanced_sample(&[] as &[u32], &or, 7),
            Err(EvalError::EmptyIr)
        ));

        let flipped = balanced_sample(&or, &ir, 7).unwrap();
        assert_eq!(flipped.items.len(), 10);
        assert_eq!(flipped.warnings.len(), 1);
    }

    #[test]
    fn fold_errors() {
        assert!(stratified_folds(&[Ir, Or, Or], 5, 0).is_err());
        assert!(matches!(
            stratified_folds(&[Ir, Or, Or, Or, Or, Or], 5, 0),
            Err(EvalError::TooFewForFolds {
                label: Ir,
                count: 1
            })
        ));
        assert!(stratified_folds(&[Ir, Ir, Or, Or], 1, 0).is_err());
    }

    fn marker_table(n_per_class: usize) -> FeatureTable {
        let data: Vec<(TaggedTweet, Label)> = (0..2 * n_per_class)
            .map(|i| {
                let (text, label) = if i % 2 == 0 {
                    (format!("qz1 common word{i}"), Ir)
                } else {
                    (format!("qz2 common word{i}"), Or)
                };
                let t = crate::text::attach_tags(&i.to_string(), tokenize(&text), None, None, None)
                    .unwrap();
                (t, label)
            })
            .collect();
        FeatureTable::build(&data)
    }

    #[test]
    fn separable_cv_is_perfect() {
        let table = marker_table(20);
        let report = cross_validate(
            &table,
            ClassSet::single(FeatureClass::Unigram),
            &CvConfig::default(),
        )
        .unwrap();
        assert_eq!(report.readings.len(), 15);
        assert_eq!(report.mean.f1, 1.0);
        assert_eq!(
            report,
            cross_validate(
                &table,
                ClassSet::single(FeatureClass::Unigram),
                &CvConfig::default()
            )
            .unwrap()
        );
    }

    #[test]
    fn word_only_lattice_has_three_entries() {
        let table = marker_table(10);
        let report = enumerate_combinations(&table, &CvConfig::default()).unwrap();
        assert_eq!(report.entries.len(), 3);
        assert_eq!(report.excluded.len(), 4);
    }

    #[test]
    fn imbalance_sweep_on_separable_data() {
        let table = marker_table(60);
        let sweep = imbalance_sweep(
            &table,
            ClassSet::single(FeatureClass::Unigram),
            &DEFAULT_RATIOS,
            5,
            3,
            1.0,
        )
        .unwrap();
        assert_eq!(sweep.results.len(), 9);
        for r in &sweep.results {
            assert!(r.auc >= 0.99, "{r:?}");
            let frac = r.n_ir as f64 / (r.n_ir + r.n_or) as f64;
            assert!((frac - r.ratio).abs() < 0.02, "{r:?}");
        }
        let half = &sweep.results[4];
        assert_eq!((half.n_ir, half.n_or), (60, 60));
        assert!(imbalance_sweep(
            &table,
            ClassSet::single(FeatureClass::Unigram),
            &[1.0],
            5,
            3,
            1.0
        )
        .is_err());
        assert!(imbalance_sweep(
            &table,
            ClassSet::single(FeatureClass::Unigram),
            &[0.001],
            5,
            3,
            1.0
        )
        .is_err());
    }

    #[test]
    fn cloud_examples() {
        let tweets = vec![
            tokenize("explosion in boston"),
            tokenize("praying in boston"),
            tokenize("b a"),
        ];
        let cloud = bigram_cloud(&tweets, 3).unwrap();
        assert_eq!(
            cloud[0],
            CloudEntry {
                bigram: "in boston".into(),
                count: 2
            }
        );
        assert_eq!(cloud[1].bigram, "b a");
        assert_eq!(cloud.len(), 3);
        assert_eq!(bigram_cloud(&tweets, 100).unwrap().len(), 4);
        assert!(bigram_cloud(&tweets, 0).is_err());
    }

    #[test]
    fn feature_table_skips_missing_layers() {
        let t = crate::text::attach_tags("a", tokenize("in boston"), None, None, None).unwrap();
        let table = FeatureTable::build(&[(t, Ir)]);
        assert_eq!(table.available_classes().len(), 2);
        let v = table.vector(0, ClassSet::ALL);
        assert_eq!(v.get(&FeatureId::new(FeatureClass::Bigram, "in boston")), 1);
    }

    /// Pairwise comparison over every (IR, OR) pair.
    fn brute_auc(scores: &[f64], truth: &[Label]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, si) in scores.iter().enumerate() {
            for (j, sj) in scores.iter().enumerate() {
                if truth[i] == Ir && truth[j] == Or {
                    pairs += 1.0;
                    if si > sj {
                        wins += 1.0;
                    } else if si == sj {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    proptest! {
        #[test]
        fn auc_matches_pairwise(
            data in proptest::collection::vec((0u8..20, any::<bool>()), 2..100)
        ) {
            let scores: Vec<f64> = data.iter().map(|(s, _)| f64::from(*s) / 4.0).collect();
            let truth: Vec<Label> = data.iter().map(|(_, b)| if *b { Ir } else { Or }).collect();
            prop_assume!(truth.contains(&Ir) && truth.contains(&Or));
            let got = roc_auc(&scores, &truth).unwrap();
            prop_assert!((got - brute_auc(&scores, &truth)).abs() < 1e-12);
        }

        #[test]
        fn folds_partition_the_data(
            labels in proptest::collection::vec(any::<bool>(), 10..200),
            seed in any::<u64>(),
        ) {
            let labels: Vec<Label> = labels.into_iter().map(|b| if b { Ir } else { Or }).collect();
            let n_ir = labels.iter().filter(|l| **l == Ir).count();
            prop_assume!(n_ir >= 2 && labels.len() - n_ir >= 2);
            let folds = stratified_folds(&labels, 5, seed).unwrap();
            let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            for test in &folds {
                let train_ir = (0..labels.len()).filter(|i| !test.contains(i) && labels[*i] == Ir).count();
                let train_or = (0..labels.len()).filter(|i| !test.contains(i) && labels[*i] == Or).count();
                prop_assert!(train_ir > 0 && train_or > 0);
            }
            let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }
}
