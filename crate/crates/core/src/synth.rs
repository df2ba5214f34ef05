//! Seeded synthetic corpora for demos and tests.
//!
//! Background text is drawn from a Zipf-like distribution over a generated
//! vocabulary; optional topic vocabularies and marker tokens inject the
//! signal a test wants to detect.

use chrono::{DateTime, Duration, Utc};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{GeoPoint, RawTweet};
use crate::model::Label;
use crate::text::{attach_tags, fallback_ark_tag, tokenize, TaggedTweet};

/// A word list with Zipf weights (`1 / rank`).
#[derive(Debug, Clone)]
pub struct Vocabulary {
    words: Vec<String>,
    weights: WeightedIndex<f64>,
}

impl Vocabulary {
    /// `size` words named `{prefix}{i}`.
    pub fn generated(prefix: &str, size: usize) -> Self {
        Self::from_words((0..size).map(|i| format!("{prefix}{i}")).collect())
    }

    pub fn from_words(words: Vec<String>) -> Self {
        assert!(!words.is_empty(), "vocabulary must not be empty");
        let weights = WeightedIndex::new((1..=words.len()).map(|r| 1.0 / r as f64))
            .expect("positive weights");
        Vocabulary { words, weights }
    }

    pub fn sample<'a, R: Rng>(&'a self, rng: &mut R) -> &'a str {
        &self.words[self.weights.sample(rng)]
    }
}

/// Text of `len` tokens where each token comes from `topic` with probability
/// `topic_share` and from `background` otherwise.
pub fn sample_text<R: Rng>(
    rng: &mut R,
    len: usize,
    background: &Vocabulary,
    topic: Option<(&Vocabulary, f64)>,
) -> String {
    (0..len)
        .map(|_| match topic {
            Some((vocab, share)) if rng.gen_bool(share) => vocab.sample(rng),
            _ => background.sample(rng),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Background vocabulary size for [`marker_corpus`]. Kept small so every
/// background word and bigram is well estimated from a few thousand tweets;
/// the marker is then the only signal a classifier can find. Large
/// backgrounds leave Naive Bayes fitting sampling noise in rare words.
pub const MARKER_BACKGROUND_WORDS: usize = 10;

/// Labeled tweets where a marker token appears in an IR tweet with
/// probability `ir_marker_rate` and in an OR tweet with `or_marker_rate`.
/// With `separate_markers`, OR tweets use their own marker (`qz2`) instead
/// of sharing `qz1`. Tweets carry fallback ARK tags; labels alternate.
pub fn marker_corpus(
    n: usize,
    ir_marker_rate: f64,
    or_marker_rate: f64,
    separate_markers: bool,
    seed: u64,
) -> Vec<(TaggedTweet, Label)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let background = Vocabulary::generated("w", MARKER_BACKGROUND_WORDS);
    (0..n)
        .map(|i| {
            let label = if i % 2 == 0 { Label::Ir } else { Label::Or };
            let len = rng.gen_range(5..=12);
            let mut words: Vec<String> = sample_text(&mut rng, len, &background, None)
                .split(' ')
                .map(str::to_string)
                .collect();
            let (rate, marker) = match label {
                Label::Ir => (ir_marker_rate, "qz1"),
                Label::Or => (or_marker_rate, if separate_markers { "qz2" } else { "qz1" }),
            };
            if rng.gen_bool(rate) {
                let at = rng.gen_range(0..=words.len());
                words.insert(at, marker.to_string());
            }
            let tokens = tokenize(&words.join(" "));
            let ark = fallback_ark_tag(&tokens);
            let tweet = attach_tags(&format!("s{i}"), tokens, Some(ark), None, None)
                .expect("fallback tags align");
            (tweet, label)
        })
        .collect()
}

/// Geotagged tweets spread uniformly over `[start, start + hours)`.
/// Hours listed in `topic_hours` draw `topic_share` of their tokens from
/// `topic`.
#[allow(clippy::too_many_arguments)]
pub fn hourly_corpus(
    start: DateTime<Utc>,
    hours: u32,
    tweets_per_hour: usize,
    geo: GeoPoint,
    background: &Vocabulary,
    topic: &Vocabulary,
    topic_hours: &[u32],
    topic_share: f64,
    seed: u64,
) -> Vec<RawTweet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for h in 0..hours {
        let topic = topic_hours.contains(&h).then_some((topic, topic_share));
        for k in 0..tweets_per_hour {
            let len = rng.gen_range(6..=12);
            let offset = Duration::hours(i64::from(h)) + Duration::seconds(rng.gen_range(0..3600));
            out.push(RawTweet {
                id: format!("h{h}-{k}"),
                text: sample_text(&mut rng, len, background, topic),
                created_at: start + offset,
                geo: Some(geo),
                ark_tags: None,
                ptb_tags: None,
                chunk_tags: None,
            });
        }
    }
    out
}
