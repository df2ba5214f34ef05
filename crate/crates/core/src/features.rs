//! Sparse raw-count feature extraction over the six linguistic feature
//! classes: word unigrams and bigrams, ARK and PTB tag n-grams, shallow-parse
//! chunks with headwords, and the crisis-sensitive patterns.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::text::{TagLayer, TaggedTweet, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FeatureClass {
    Unigram,
    Bigram,
    ArkPos,
    PtbPos,
    ShallowParse,
    CrisisSensitive,
}

impl FeatureClass {
    pub const ALL: [FeatureClass; 6] = [
        FeatureClass::Unigram,
        FeatureClass::Bigram,
        FeatureClass::ArkPos,
        FeatureClass::PtbPos,
        FeatureClass::ShallowParse,
        FeatureClass::CrisisSensitive,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureClass::Unigram => "UNIGRAM",
            FeatureClass::Bigram => "BIGRAM",
            FeatureClass::ArkPos => "ARK_POS",
            FeatureClass::PtbPos => "PTB_POS",
            FeatureClass::ShallowParse => "SHALLOW_PARSE",
            FeatureClass::CrisisSensitive => "CRISIS_SENSITIVE",
        }
    }

    /// Tag layers a tweet must carry for this class to be extracted.
    pub fn required_layers(&self) -> &'static [TagLayer] {
        match self {
            FeatureClass::Unigram | FeatureClass::Bigram => &[],
            FeatureClass::ArkPos | FeatureClass::CrisisSensitive => &[TagLayer::Ark],
            FeatureClass::PtbPos => &[TagLayer::Ptb],
            FeatureClass::ShallowParse => &[TagLayer::Chunk],
        }
    }

    fn bit(&self) -> u8 {
        1 << (*self as u8)
    }
}

impl fmt::Display for FeatureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureClass {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureClass::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| FeatureError::UnknownClass(s.to_string()))
    }
}

/// A subset of the six feature classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ClassSet(u8);

impl ClassSet {
    pub const EMPTY: ClassSet = ClassSet(0);
    pub const ALL: ClassSet = ClassSet(0b11_1111);

    pub fn single(class: FeatureClass) -> Self {
        ClassSet(class.bit())
    }

    pub fn contains(&self, class: FeatureClass) -> bool {
        self.0 & class.bit() != 0
    }

    pub fn insert(&mut self, class: FeatureClass) {
        self.0 |= class.bit();
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_subset(&self, other: &ClassSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = FeatureClass> + '_ {
        FeatureClass::ALL.into_iter().filter(|c| self.contains(*c))
    }

    /// Every non-empty subset of `self`, in increasing bitmask order.
    pub fn non_empty_subsets(&self) -> Vec<ClassSet> {
        (1..=ClassSet::ALL.0)
            .map(ClassSet)
            .filter(|s| s.is_subset(self))
            .collect()
    }
}

impl FromIterator<FeatureClass> for ClassSet {
    fn from_iter<I: IntoIterator<Item = FeatureClass>>(iter: I) -> Self {
        let mut set = ClassSet::EMPTY;
        for c in iter {
            set.insert(c);
        }
        set
    }
}

impl fmt::Display for ClassSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.iter().map(|c| c.as_str()).collect();
        f.write_str(&names.join("+"))
    }
}

impl Serialize for ClassSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for ClassSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(Vec::<FeatureClass>::deserialize(deserializer)?
            .into_iter()
            .collect())
    }
}

/// A class-qualified feature key. Rendered as `CLASS:key`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureId {
    pub class: FeatureClass,
    pub key: String,
}

impl FeatureId {
    pub fn new(class: FeatureClass, key: impl Into<String>) -> Self {
        FeatureId {
            class,
            key: key.into(),
        }
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.class, self.key)
    }
}

impl FromStr for FeatureId {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (class, key) = s
            .split_once(':')
            .ok_or_else(|| FeatureError::MalformedId(s.to_string()))?;
        Ok(FeatureId::new(class.parse()?, key))
    }
}

impl Serialize for FeatureId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeatureId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Sparse raw frequency counts. Absent features have count zero; stored
/// counts are always at least one.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(BTreeMap<FeatureId, u32>);

impl FeatureVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, id: FeatureId, count: u32) {
        if count > 0 {
            *self.0.entry(id).or_insert(0) += count;
        }
    }

    pub fn increment(&mut self, class: FeatureClass, key: impl Into<String>) {
        self.add(FeatureId::new(class, key), 1);
    }

    pub fn get(&self, id: &FeatureId) -> u32 {
        self.0.get(id).copied().unwrap_or(0)
    }

    /// Lookup by class and key without building a [`FeatureId`] by hand.
    pub fn count(&self, class: FeatureClass, key: &str) -> u32 {
        self.get(&FeatureId::new(class, key))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.0.values().map(|&c| u64::from(c)).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FeatureId, u32)> {
        self.0.iter().map(|(k, &v)| (k, v))
    }

    /// Adds every count of `other` into `self`.
    pub fn merge(&mut self, other: &FeatureVector) {
        for (id, count) in other.iter() {
            self.add(id.clone(), count);
        }
    }

    pub fn restrict(&self, class: FeatureClass) -> FeatureVector {
        FeatureVector(
            self.0
                .iter()
                .filter(|(id, _)| id.class == class)
                .map(|(id, &c)| (id.clone(), c))
                .collect(),
        )
    }

    /// Multiplies every count by `factor` (which must be positive).
    pub fn scaled(&self, factor: u32) -> FeatureVector {
        assert!(factor > 0, "scale factor must be positive");
        FeatureVector(
            self.0
                .iter()
                .map(|(id, &c)| (id.clone(), c * factor))
                .collect(),
        )
    }
}

impl FromIterator<(FeatureId, u32)> for FeatureVector {
    fn from_iter<I: IntoIterator<Item = (FeatureId, u32)>>(iter: I) -> Self {
        let mut v = FeatureVector::new();
        for (id, c) in iter {
            v.add(id, c);
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("tweet {tweet_id}: {layer} layer required for {class} is absent")]
    LayerAbsent {
        tweet_id: String,
        layer: TagLayer,
        class: FeatureClass,
    },
    #[error("n-gram order {n} not supported (expected {min}..={max})")]
    UnsupportedOrder { n: usize, min: usize, max: usize },
    #[error("no feature classes requested")]
    NoClasses,
    #[error("unknown feature class `{0}`")]
    UnknownClass(String),
    #[error("malformed feature id `{0}` (expected CLASS:key)")]
    MalformedId(String),
    #[error("tweet {tweet_id}: classes skipped for missing layers: {classes}")]
    Skipped { tweet_id: String, classes: String },
}

fn require_layer(
    tweet: &TaggedTweet,
    layer: TagLayer,
    class: FeatureClass,
) -> Result<&[String], FeatureError> {
    tweet.layer(layer).ok_or_else(|| FeatureError::LayerAbsent {
        tweet_id: tweet.id().to_string(),
        layer,
        class,
    })
}

fn count_windows<S: AsRef<str>>(
    items: &[S],
    n: usize,
    class: FeatureClass,
    out: &mut FeatureVector,
) {
    for window in items.windows(n) {
        let key = window
            .iter()
            .map(AsRef::as_ref)
            .collect::<Vec<_>>()
            .join(" ");
        out.increment(class, key);
    }
}

/// Contiguous word n-grams (`n` = 1 or 2), no padding.
pub fn extract_word_ngrams(tweet: &TaggedTweet, n: usize) -> Result<FeatureVector, FeatureError> {
    let class = match n {
        1 => FeatureClass::Unigram,
        2 => FeatureClass::Bigram,
        _ => return Err(FeatureError::UnsupportedOrder { n, min: 1, max: 2 }),
    };
    let mut out = FeatureVector::new();
    count_windows(tweet.tokens(), n, class, &mut out);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tagset {
    Ark,
    Ptb,
}

impl Tagset {
    fn layer(&self) -> TagLayer {
        match self {
            Tagset::Ark => TagLayer::Ark,
            Tagset::Ptb => TagLayer::Ptb,
        }
    }

    fn class(&self) -> FeatureClass {
        match self {
            Tagset::Ark => FeatureClass::ArkPos,
            Tagset::Ptb => FeatureClass::PtbPos,
        }
    }
}

/// Contiguous tag n-grams of a single order `n` in `1..=3`.
pub fn extract_pos_ngrams(
    tweet: &TaggedTweet,
    tagset: Tagset,
    n: usize,
) -> Result<FeatureVector, FeatureError> {
    if !(1..=3).contains(&n) {
        return Err(FeatureError::UnsupportedOrder { n, min: 1, max: 3 });
    }
    let tags = require_layer(tweet, tagset.layer(), tagset.class())?;
    let mut out = FeatureVector::new();
    count_windows(tags, n, tagset.class(), &mut out);
    Ok(out)
}

/// Full POS class: tag n-grams for n = 1, 2 and 3.
pub fn extract_pos_class(
    tweet: &TaggedTweet,
    tagset: Tagset,
) -> Result<FeatureVector, FeatureError> {
    let mut out = FeatureVector::new();
    for n in 1..=3 {
        out.merge(&extract_pos_ngrams(tweet, tagset, n)?);
    }
    Ok(out)
}

/// A maximal chunk from an IOB sequence: `[start, end)` token span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    pub label: String,
    pub start: usize,
    pub end: usize,
}

fn split_iob(tag: &str) -> Option<(char, &str)> {
    let (prefix, label) = tag.split_once('-')?;
    match prefix {
        "B" | "b" => Some(('B', label)),
        "I" | "i" => Some(('I', label)),
        _ => None,
    }
}

/// Group IOB chunk tags into maximal chunks. An `I-X` that does not continue
/// an open `X` chunk starts a new one; `O` and unrecognised tags close the
/// open chunk.
pub fn chunks_from_iob<S: AsRef<str>>(tags: &[S]) -> Vec<Chunk> {
    let mut chunks: Vec<Chunk> = Vec::new();
    let mut open = false;
    for (i, tag) in tags.iter().enumerate() {
        match split_iob(tag.as_ref()) {
            Some(('I', label))
                if open
                    && chunks
                        .last()
                        .is_some_and(|c| c.label.eq_ignore_ascii_case(label)) =>
            {
                chunks.last_mut().expect("open chunk").end = i + 1;
            }
            Some((_, label)) => {
                chunks.push(Chunk {
                    label: label.to_uppercase(),
                    start: i,
                    end: i + 1,
                });
                open = true;
            }
            None => open = false,
        }
    }
    chunks
}

/// Chunk-label n-grams (n = 1..3) over the chunk sequence, plus one
/// `LABEL:headword` feature per chunk where the headword is the chunk's last
/// token.
pub fn extract_shallow_parse(tweet: &TaggedTweet) -> Result<FeatureVector, FeatureError> {
    let class = FeatureClass::ShallowParse;
    let tags = require_layer(tweet, TagLayer::Chunk, class)?;
    let chunks = chunks_from_iob(tags);
    let labels: Vec<&str> = chunks.iter().map(|c| c.label.as_str()).collect();
    let mut out = FeatureVector::new();
    for n in 1..=3 {
        count_windows(&labels, n, class, &mut out);
    }
    for chunk in &chunks {
        let head = &tweet.tokens()[chunk.end - 1];
        out.increment(class, format!("{}:{}", chunk.label, head));
    }
    Ok(out)
}

/// ARK tag patterns whose occurrences are counted by the crisis-sensitive class.
pub const CRISIS_PATTERNS: [&[&str]; 9] = [
    &["N"],
    &["A"],
    &["!"],
    &["N", "R"],
    &["L", "A"],
    &["N", "P"],
    &["P", "D", "N"],
    &["L", "A", "!"],
    &["A", "N", "P"],
];

/// Verbal PTB tags accepted as the verb following an existential `there`.
fn is_ptb_verb(tag: &str) -> bool {
    tag.starts_with("VB") || tag == "MD"
}

/// Crisis-sensitive features: tag-pattern and word/tag-pattern occurrences,
/// the `in ... N` prepositional pattern, and existential `there` with its verb.
pub fn extract_crisis_sensitive(tweet: &TaggedTweet) -> Result<FeatureVector, FeatureError> {
    let class = FeatureClass::CrisisSensitive;
    let ark = require_layer(tweet, TagLayer::Ark, class)?;
    let tokens = tweet.tokens();
    let mut out = FeatureVector::new();

    for pattern in CRISIS_PATTERNS {
        let n = pattern.len();
        for start in 0..tokens.len().saturating_sub(n - 1) {
            if ark[start..start + n]
                .iter()
                .zip(pattern)
                .all(|(t, p)| t == p)
            {
                out.increment(class, format!("PAT:{}", pattern.join(" ")));
                let wt: Vec<String> = (start..start + n)
                    .map(|i| format!("{}/{}", tokens[i], ark[i]))
                    .collect();
                out.increment(class, format!("WT:{}", wt.join(" ")));
            }
        }
    }

    let chunks = tweet.layer(TagLayer::Chunk).map(chunks_from_iob);
    for (noun, _) in pp_matches(tokens, ark, chunks.as_deref()) {
        out.increment(class, format!("PP:in:{}", tokens[noun]));
    }

    for verb in existential_verbs(tokens, ark, tweet.layer(TagLayer::Ptb)) {
        out.increment(class, format!("EX:{}", tokens[verb]));
    }
    Ok(out)
}

/// Returns `(noun_index, in_index)` for each `in` (tagged `P`) followed by
/// zero or more `D`/`A` tokens and then an `N`. With a chunk layer the `in`
/// must head a PP chunk and the rest must lie in the single NP chunk that
/// immediately follows it.
fn pp_matches(tokens: &[Token], ark: &[String], chunks: Option<&[Chunk]>) -> Vec<(usize, usize)> {
    let mut found = Vec::new();
    for (i, tok) in tokens.iter().enumerate() {
        if tok.as_str() != "in" || ark[i] != "P" {
            continue;
        }
        let mut j = i + 1;
        while j < tokens.len() && (ark[j] == "D" || ark[j] == "A") {
            j += 1;
        }
        if j >= tokens.len() || ark[j] != "N" {
            continue;
        }
        if let Some(chunks) = chunks {
            let find = |idx: usize| chunks.iter().position(|c| c.start <= idx && idx < c.end);
            let pp_ok = find(i).is_some_and(|ci| {
                let pp = &chunks[ci];
                let np = chunks.get(ci + 1);
                pp.label == "PP"
                    && pp.end == i + 1
                    && np.is_some_and(|np| np.label == "NP" && np.start == i + 1 && j < np.end)
            });
            if !pp_ok {
                continue;
            }
        }
        found.push((j, i));
    }
    found
}

const COPULAR: &[&str] = &[
    "is", "are", "was", "were", "be", "been", "am", "seems", "seem", "appears", "appear", "remain",
    "remains",
];

/// Indices of verbs paired with an existential `there`.
///
/// With a PTB layer, a token tagged `EX` pairs with the first verbal tag
/// (`VB*`, `MD`) among the next two tokens. Without it, the token `there`
/// qualifies when not preceded by a preposition and followed within two
/// tokens by a `V`-tagged or copular token.
fn existential_verbs(tokens: &[Token], ark: &[String], ptb: Option<&[String]>) -> Vec<usize> {
    let mut verbs = Vec::new();
    for i in 0..tokens.len() {
        let window = i + 1..(i + 3).min(tokens.len());
        let verb = match ptb {
            Some(ptb) => {
                if ptb[i] != "EX" {
                    continue;
                }
                window.clone().find(|&j| is_ptb_verb(&ptb[j]))
            }
            None => {
                if tokens[i].as_str() != "there" || (i > 0 && ark[i - 1] == "P") {
                    continue;
                }
                window
                    .clone()
                    .find(|&j| ark[j] == "V" || COPULAR.contains(&tokens[j].as_str()))
            }
        };
        verbs.extend(verb);
    }
    verbs
}

/// How [`vectorize`] treats classes whose tag layer is missing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MissingLayerPolicy {
    /// Drop the class for this tweet and report it.
    #[default]
    Skip,
    /// Fail on the first missing layer.
    Error,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vectorized {
    pub vector: FeatureVector,
    /// Requested classes that could not be extracted for this tweet.
    pub skipped: Vec<FeatureClass>,
}

pub fn extract_class(
    tweet: &TaggedTweet,
    class: FeatureClass,
) -> Result<FeatureVector, FeatureError> {
    match class {
        FeatureClass::Unigram => extract_word_ngrams(tweet, 1),
        FeatureClass::Bigram => extract_word_ngrams(tweet, 2),
        FeatureClass::ArkPos => extract_pos_class(tweet, Tagset::Ark),
        FeatureClass::PtbPos => extract_pos_class(tweet, Tagset::Ptb),
        FeatureClass::ShallowParse => extract_shallow_parse(tweet),
        FeatureClass::CrisisSensitive => extract_crisis_sensitive(tweet),
    }
}

/// Union of the per-class vectors for `classes`.
pub fn vectorize(
    tweet: &TaggedTweet,
    classes: ClassSet,
    policy: MissingLayerPolicy,
) -> Result<Vectorized, FeatureError> {
    if classes.is_empty() {
        return Err(FeatureError::NoClasses);
    }
    let mut result = Vectorized::default();
    for class in classes.iter() {
        match extract_class(tweet, class) {
            Ok(v) => result.vector.merge(&v),
            Err(FeatureError::LayerAbsent { .. }) if policy == MissingLayerPolicy::Skip => {
                result.skipped.push(class)
            }
            Err(e) => return Err(e),
        }
    }
    Ok(result)
}

/// Classes from `classes` whose layers are all present on `tweet`.
pub fn extractable_classes(tweet: &TaggedTweet, classes: ClassSet) -> ClassSet {
    classes
        .iter()
        .filter(|c| c.required_layers().iter().all(|l| tweet.has_layer(*l)))
        .collect()
}
