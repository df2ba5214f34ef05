//! Classifiers: multinomial Naive Bayes, L2-regularized logistic regression
//! and the select-all baseline.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{ClassSet, FeatureClass, FeatureId, FeatureVector};

/// Binary target: inside or outside the crisis region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "IR")]
    Ir,
    #[serde(rename = "OR")]
    Or,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Ir => "IR",
            Label::Or => "OR",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledVector {
    pub vector: FeatureVector,
    pub label: Label,
}

impl LabeledVector {
    pub fn new(vector: FeatureVector, label: Label) -> Self {
        LabeledVector { vector, label }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    pub score: f64,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training data is empty")]
    EmptyData,
    #[error("training data contains only {0} examples; both labels are required")]
    SingleClass(Label),
    #[error("smoothing constant must be positive, got {0}")]
    InvalidAlpha(f64),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("loss became non-finite at epoch {epoch}; lower the learning rate")]
    NonFiniteLoss { epoch: usize },
    #[error("k must be positive")]
    InvalidK,
    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u32),
    #[error("model file: {0}")]
    Json(#[from] serde_json::Error),
}

fn label_counts(data: &[LabeledVector]) -> Result<(usize, usize), ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyData);
    }
    let ir = data.iter().filter(|d| d.label == Label::Ir).count();
    let or = data.len() - ir;
    match (ir, or) {
        (0, _) => Err(ModelError::SingleClass(Label::Or)),
        (_, 0) => Err(ModelError::SingleClass(Label::Ir)),
        counts => Ok(counts),
    }
}

/// Per-label pair of log probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogPair {
    pub ir: f64,
    pub or: f64,
}

impl LogPair {
    pub fn get(&self, label: Label) -> f64 {
        match label {
            Label::Ir => self.ir,
            Label::Or => self.or,
        }
    }
}

/// Multinomial Naive Bayes with Laplace smoothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub alpha: f64,
    pub class_log_priors: LogPair,
    /// Smoothed `log P(feature | label)` for every training feature.
    pub feature_log_likelihood: BTreeMap<FeatureId, LogPair>,
}

pub const DEFAULT_ALPHA: f64 = 1.0;

pub fn train_naive_bayes(
    data: &[LabeledVector],
    alpha: f64,
) -> Result<NaiveBayesModel, ModelError> {
    if alpha <= 0.0 || !alpha.is_finite() {
        return Err(ModelError::InvalidAlpha(alpha));
    }
    let (n_ir, n_or) = label_counts(data)?;
    let total = data.len() as f64;

    let mut counts: BTreeMap<FeatureId, [u64; 2]> = BTreeMap::new();
    let mut totals = [0u64; 2];
    for example in data {
        let slot = match example.label {
            Label::Ir => 0,
            Label::Or => 1,
        };
        for (id, c) in example.vector.iter() {
            counts.entry(id.clone()).or_default()[slot] += u64::from(c);
            totals[slot] += u64::from(c);
        }
    }

    let vocab = counts.len() as f64;
    let denom = [
        totals[0] as f64 + alpha * vocab,
        totals[1] as f64 + alpha * vocab,
    ];
    let feature_log_likelihood = counts
        .into_iter()
        .map(|(id, [ir, or])| {
            let pair = LogPair {
                ir: ((ir as f64 + alpha) / denom[0]).ln(),
                or: ((or as f64 + alpha) / denom[1]).ln(),
            };
            (id, pair)
        })
        .collect();

    let model = NaiveBayesModel {
        alpha,
        class_log_priors: LogPair {
            ir: (n_ir as f64 / total).ln(),
            or: (n_or as f64 / total).ln(),
        },
        feature_log_likelihood,
    };
    debug_assert!(model.normalization_error() < 1e-9);
    Ok(model)
}

impl NaiveBayesModel {
    pub fn vocabulary(&self) -> impl Iterator<Item = &FeatureId> {
        self.feature_log_likelihood.keys()
    }

    pub fn vocabulary_size(&self) -> usize {
        self.feature_log_likelihood.len()
    }

    /// Largest deviation from 1 among the exponentiated priors and per-label
    /// likelihood tables. An empty vocabulary contributes no likelihood check.
    pub fn normalization_error(&self) -> f64 {
        let priors = self.class_log_priors.ir.exp() + self.class_log_priors.or.exp();
        let mut worst = (priors - 1.0).abs();
        if !self.feature_log_likelihood.is_empty() {
            for label in [Label::Ir, Label::Or] {
                let sum: f64 = self
                    .feature_log_likelihood
                    .values()
                    .map(|p| p.get(label).exp())
                    .sum();
                worst = worst.max((sum - 1.0).abs());
            }
        }
        worst
    }

    /// `log P(IR | x) - log P(OR | x)`, ignoring features outside the
    /// training vocabulary.
    pub fn score(&self, vector: &FeatureVector) -> f64 {
        let mut margin = 0.0;
        for (id, count) in vector.iter() {
            if let Some(pair) = self.feature_log_likelihood.get(id) {
                margin += f64::from(count) * (pair.ir - pair.or);
            }
        }
        margin + self.class_log_priors.ir - self.class_log_priors.or
    }

    pub fn predict(&self, vector: &FeatureVector) -> Prediction {
        predict_nb(self, vector)
    }
}

/// Ties (score exactly zero) go to IR.
pub fn predict_nb(model: &NaiveBayesModel, vector: &FeatureVector) -> Prediction {
    let score = model.score(vector);
    let label = if score >= 0.0 { Label::Ir } else { Label::Or };
    Prediction { label, score }
}

/// Labels everything IR.
pub fn select_all_baseline(_vector: &FeatureVector) -> Prediction {
    Prediction {
        label: Label::Ir,
        score: f64::INFINITY,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogRegParams {
    pub learning_rate: f64,
    pub l2: f64,
    pub max_epochs: usize,
    pub tolerance: f64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        LogRegParams {
            learning_rate: 0.1,
            l2: 1e-4,
            max_epochs: 500,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegressionModel {
    pub weights: BTreeMap<FeatureId, f64>,
    pub bias: f64,
    pub params: LogRegParams,
    pub epochs_run: usize,
    pub converged: bool,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Data in dense-index sparse-row form for gradient descent.
pub struct DesignMatrix {
    pub features: Vec<FeatureId>,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub targets: Vec<f64>,
}

impl DesignMatrix {
    pub fn new(data: &[LabeledVector]) -> Self {
        let vocab: BTreeSet<&FeatureId> = data
            .iter()
            .flat_map(|d| d.vector.iter().map(|(id, _)| id))
            .collect();
        let features: Vec<FeatureId> = vocab.into_iter().cloned().collect();
        let index: BTreeMap<&FeatureId, usize> =
            features.iter().enumerate().map(|(i, f)| (f, i)).collect();
        let rows = data
            .iter()
            .map(|d| {
                d.vector
                    .iter()
                    .map(|(id, c)| (index[id], f64::from(c)))
                    .collect()
            })
            .collect();
        let targets = data
            .iter()
            .map(|d| if d.label == Label::Ir { 1.0 } else { 0.0 })
            .collect();
        DesignMatrix {
            features,
            rows,
            targets,
        }
    }

    /// Mean negative log-likelihood plus `l2 / 2 * |w|^2` (bias unpenalized),
    /// and its gradient with respect to `(weights, bias)`.
    pub fn loss_and_gradient(&self, weights: &[f64], bias: f64, l2: f64) -> (f64, Vec<f64>, f64) {
        let n = self.rows.len() as f64;
        let mut grad = vec![0.0; weights.len()];
        let mut grad_bias = 0.0;
        let mut loss = 0.0;
        for (row, &y) in self.rows.iter().zip(&self.targets) {
            let z = bias + row.iter().map(|&(j, x)| weights[j] * x).sum::<f64>();
            loss += softplus(z) - y * z;
            let residual = sigmoid(z) - y;
            for &(j, x) in row {
                grad[j] += residual * x;
            }
            grad_bias += residual;
        }
        loss /= n;
        grad_bias /= n;
        let mut penalty = 0.0;
        for (g, &w) in grad.iter_mut().zip(weights) {
            *g = *g / n + l2 * w;
            penalty += w * w;
        }
        loss += 0.5 * l2 * penalty;
        (loss, grad, grad_bias)
    }
}

fn validate_params(params: &LogRegParams) -> Result<(), ModelError> {
    let bad = |what: &str| Err(ModelError::InvalidHyperparameter(what.to_string()));
    if params.learning_rate <= 0.0 || !params.learning_rate.is_finite() {
        return bad("learning rate must be positive");
    }
    if params.l2 < 0.0 || !params.l2.is_finite() {
        return bad("L2 strength must be non-negative");
    }
    if params.tolerance.is_nan() || params.tolerance < 0.0 {
        return bad("tolerance must be non-negative");
    }
    Ok(())
}

/// Batch gradient descent from zero initialization. Stops once the largest
/// absolute parameter update falls below the tolerance or after
/// `max_epochs`.
pub fn train_logreg(
    data: &[LabeledVector],
    params: LogRegParams,
) -> Result<LogisticRegressionModel, ModelError> {
    validate_params(&params)?;
    label_counts(data)?;
    let design = DesignMatrix::new(data);
    let mut weights = vec![0.0; design.features.len()];
    let mut bias = 0.0;
    let mut converged = false;
    let mut epochs_run = 0;
    for epoch in 0..params.max_epochs {
        let (loss, grad, grad_bias) = design.loss_and_gradient(&weights, bias, params.l2);
        if !loss.is_finite() {
            return Err(ModelError::NonFiniteLoss { epoch });
        }
        let mut max_step = (params.learning_rate * grad_bias).abs();
        bias -= params.learning_rate * grad_bias;
        for (w, g) in weights.iter_mut().zip(&grad) {
            let step = params.learning_rate * g;
            max_step = max_step.max(step.abs());
            *w -= step;
        }
        epochs_run = epoch + 1;
        if !max_step.is_finite() || weights.iter().any(|w| !w.is_finite()) || !bias.is_finite() {
            return Err(ModelError::NonFiniteLoss { epoch });
        }
        if max_step < params.tolerance {
            converged = true;
            break;
        }
    }
    Ok(LogisticRegressionModel {
        weights: design.features.into_iter().zip(weights).collect(),
        bias,
        params,
        epochs_run,
        converged,
    })
}

impl LogisticRegressionModel {
    pub fn probability(&self, vector: &FeatureVector) -> f64 {
        let z = self.bias
            + vector
                .iter()
                .filter_map(|(id, c)| self.weights.get(id).map(|w| w * f64::from(c)))
                .sum::<f64>();
        sigmoid(z)
    }

    pub fn predict(&self, vector: &FeatureVector) -> Prediction {
        let score = self.probability(vector);
        let label = if score >= 0.5 { Label::Ir } else { Label::Or };
        Prediction { label, score }
    }
}

/// The `k` highest-weighted features of `class`, IR-indicative first; ties
/// by key.
pub fn top_features(
    model: &LogisticRegressionModel,
    k: usize,
    class: FeatureClass,
) -> Result<Vec<(FeatureId, f64)>, ModelError> {
    if k == 0 {
        return Err(ModelError::InvalidK);
    }
    let mut ranked: Vec<(FeatureId, f64)> = model
        .weights
        .iter()
        .filter(|(id, _)| id.class == class)
        .map(|(id, &w)| (id.clone(), w))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.key.cmp(&b.0.key)));
    ranked.truncate(k);
    Ok(ranked)
}

pub const MODEL_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum TrainedModel {
    #[serde(rename = "nb")]
    NaiveBayes(NaiveBayesModel),
    #[serde(rename = "logreg")]
    LogisticRegression(LogisticRegressionModel),
}

impl TrainedModel {
    pub fn predict(&self, vector: &FeatureVector) -> Prediction {
        match self {
            TrainedModel::NaiveBayes(m) => m.predict(vector),
            TrainedModel::LogisticRegression(m) => m.predict(vector),
        }
    }
}

/// On-disk model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    /// Feature classes the model was trained on.
    pub classes: ClassSet,
    #[serde(flatten)]
    pub model: TrainedModel,
}

impl ModelFile {
    pub fn new(classes: ClassSet, model: TrainedModel) -> Self {
        ModelFile {
            version: MODEL_FILE_VERSION,
            classes,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String, ModelError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        let file: ModelFile = serde_json::from_str(s)?;
        if file.version != MODEL_FILE_VERSION {
            return Err(ModelError::UnsupportedVersion(file.version));
        }
        Ok(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fv(pairs: &[(&str, u32)]) -> FeatureVector {
        pairs
            .iter()
            .map(|(k, c)| (FeatureId::new(FeatureClass::Unigram, *k), *c))
            .collect()
    }

    fn ex(pairs: &[(&str, u32)], label: Label) -> LabeledVector {
        LabeledVector::new(fv(pairs), label)
    }

    fn id(k: &str) -> FeatureId {
        FeatureId::new(FeatureClass::Unigram, k)
    }

    fn two_example_model() -> NaiveBayesModel {
        train_naive_bayes(
            &[ex(&[("x", 1)], Label::Ir), ex(&[("y", 1)], Label::Or)],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn nb_hand_computed_likelihoods() {
        let m = two_example_model();
        assert_relative_eq!(m.class_log_priors.ir.exp(), 0.5, epsilon = 1e-12);
        assert_relative_eq!(m.class_log_priors.or.exp(), 0.5, epsilon = 1e-12);
        let x = m.feature_log_likelihood[&id("x")];
        assert_relative_eq!(x.ir.exp(), 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(x.or.exp(), 1.0 / 3.0, epsilon = 1e-12);
        assert!(m.normalization_error() < 1e-9);
    }

    #[test]
    fn nb_prediction_examples() {
        let m = two_example_model();
        let p = predict_nb(&m, &fv(&[("x", 1)]));
        assert_eq!(p.label, Label::Ir);
        assert_relative_eq!(p.score, 2f64.ln(), epsilon = 1e-12);

        let empty = predict_nb(&m, &FeatureVector::new());
        assert_eq!(empty.score, 0.0);
        assert_eq!(empty.label, Label::Ir);

        let oov = predict_nb(&m, &fv(&[("zzz", 4)]));
        assert_eq!(oov, empty);
        assert_eq!(predict_nb(&m, &fv(&[("y", 1)])).label, Label::Or);
    }

    #[test]
    fn nb_likelihoods_invariant_under_uniform_duplication() {
        let base = vec![
            ex(&[("a", 2), ("b", 1)], Label::Ir),
            ex(&[("b", 3)], Label::Ir),
            ex(&[("c", 1), ("a", 1)], Label::Or),
        ];
        let doubled: Vec<_> = base.iter().chain(&base).cloned().collect();
        let m1 = train_naive_bayes(&base, 1.0).unwrap();
        let m2 = train_naive_bayes(&doubled, 1.0).unwrap();
        assert_relative_eq!(
            m1.class_log_priors.ir,
            m2.class_log_priors.ir,
            epsilon = 1e-12
        );
        // Counts double while alpha does not, so likelihoods move; with the
        // smoothing scaled alongside they are identical.
        let m3 = train_naive_bayes(&doubled, 2.0).unwrap();
        for (f, p) in &m1.feature_log_likelihood {
            let q = m3.feature_log_likelihood[f];
            assert_relative_eq!(p.ir, q.ir, epsilon = 1e-12);
            assert_relative_eq!(p.or, q.or, epsilon = 1e-12);
        }
        assert_eq!(m1.vocabulary_size(), m2.vocabulary_size());
    }

    #[test]
    fn nb_rejects_bad_input() {
        assert!(matches!(
            train_naive_bayes(&[], 1.0),
            Err(ModelError::EmptyData)
        ));
        assert!(matches!(
            train_naive_bayes(&[ex(&[("a", 1)], Label::Ir)], 1.0),
            Err(ModelError::SingleClass(_))
        ));
        let data = [ex(&[("x", 1)], Label::Ir), ex(&[("y", 1)], Label::Or)];
        assert!(matches!(
            train_naive_bayes(&data, 0.0),
            Err(ModelError::InvalidAlpha(_))
        ));
    }

    #[test]
    fn nb_with_empty_vectors_is_prior_only() {
        let data = [ex(&[], Label::Ir), ex(&[], Label::Ir), ex(&[], Label::Or)];
        let m = train_naive_bayes(&data, 1.0).unwrap();
        assert_eq!(m.vocabulary_size(), 0);
        assert_relative_eq!(m.score(&fv(&[("a", 1)])), 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn count_scaling_scales_likelihood_margin() {
        let m = train_naive_bayes(
            &[
                ex(&[("a", 2), ("b", 1)], Label::Ir),
                ex(&[("b", 2)], Label::Or),
                ex(&[("c", 1)], Label::Or),
            ],
            1.0,
        )
        .unwrap();
        let v = fv(&[("a", 1), ("b", 2), ("c", 1)]);
        let prior = m.class_log_priors.ir - m.class_log_priors.or;
        let base = m.score(&v) - prior;
        for k in 1..5 {
            assert_relative_eq!(
                m.score(&v.scaled(k)) - prior,
                base * f64::from(k),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn baseline_always_ir() {
        let p = select_all_baseline(&fv(&[("anything", 3)]));
        assert_eq!(p.label, Label::Ir);
        assert!(p.score.is_infinite() && p.score > 0.0);
    }

    #[test]
    fn logreg_separable_signs_and_ranking() {
        let mut data = Vec::new();
        for _ in 0..10 {
            data.push(ex(&[("a", 1)], Label::Ir));
            data.push(ex(&[("b", 1)], Label::Or));
        }
        let m = train_logreg(&data, LogRegParams::default()).unwrap();
        assert!(m.weights[&id("a")] > 0.0);
        assert!(m.weights[&id("b")] < 0.0);
        let top = top_features(&m, 5, FeatureClass::Unigram).unwrap();
        assert_eq!(top.len(), 2);
        assert_eq!(top[0].0, id("a"));
        assert!(top_features(&m, 5, FeatureClass::Bigram)
            .unwrap()
            .is_empty());
        assert!(matches!(
            top_features(&m, 0, FeatureClass::Unigram),
            Err(ModelError::InvalidK)
        ));
        assert_eq!(m.predict(&fv(&[("a", 1)])).label, Label::Ir);
        assert_eq!(m.predict(&fv(&[("b", 1)])).label, Label::Or);
    }

    #[test]
    fn logreg_intercept_only_matches_logit() {
        let mut data = Vec::new();
        for i in 0..40 {
            data.push(ex(&[], if i % 4 == 0 { Label::Or } else { Label::Ir }));
        }
        let m = train_logreg(&data, LogRegParams::default()).unwrap();
        assert!(m.weights.is_empty());
        let logit = (0.75f64 / 0.25).ln();
        assert!((m.bias - logit).abs() < 0.05, "{}", m.bias);
    }

    #[test]
    fn logreg_reports_divergence() {
        let data = [
            ex(&[("a", 1_000_000)], Label::Ir),
            ex(&[("b", 1_000_000)], Label::Or),
        ];
        let params = LogRegParams {
            learning_rate: 1e6,
            l2: 1.0,
            ..LogRegParams::default()
        };
        assert!(matches!(
            train_logreg(&data, params),
            Err(ModelError::NonFiniteLoss { .. })
        ));
        assert!(matches!(
            train_logreg(&[], LogRegParams::default()),
            Err(ModelError::EmptyData)
        ));
    }

    #[test]
    fn model_file_round_trip() {
        let nb = two_example_model();
        let file = ModelFile::new(
            ClassSet::single(FeatureClass::Unigram),
            TrainedModel::NaiveBayes(nb),
        );
        let json = file.to_json().unwrap();
        assert!(json.contains("\"kind\": \"nb\""));
        assert!(json.contains("\"version\": 1"));
        assert_eq!(ModelFile::from_json(&json).unwrap(), file);

        let bumped = json.replace("\"version\": 1", "\"version\": 9");
        assert!(matches!(
            ModelFile::from_json(&bumped),
            Err(ModelError::UnsupportedVersion(9))
        ));
    }
}
