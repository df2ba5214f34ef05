//! Classify short social-media messages as posted inside or outside a crisis
//! region using only their language.
//!
//! The pipeline runs in stages, one module each:
//!
//! - [`ingest`]: load JSON Lines corpora and partition geotagged messages by
//!   region and time window.
//! - [`text`]: tokenize, align externally produced tag layers, and fall back
//!   to a rule-based ARK-style tagger.
//! - [`features`]: sparse raw-count vectors over six feature classes.
//! - [`model`]: Naive Bayes, logistic regression and the select-all baseline.
//! - [`divergence`]: Jensen-Shannon divergence matrices between tweet groups.
//! - [`eval`]: balanced sampling, repeated cross-validation, ROC AUC and the
//!   feature-class combination search.

pub mod divergence;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod model;
pub mod synth;
pub mod text;

pub use features::{ClassSet, FeatureClass, FeatureId, FeatureVector};
pub use ingest::{GeoPoint, PartitionLabel, PartitionScheme, RawTweet, Region, TimeWindow};
pub use model::{Label, LabeledVector, Prediction};
pub use text::{TaggedTweet, Token};
