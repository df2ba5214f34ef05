//! Corpus loading and geographic/temporal partitioning.
//!
//! Messages arrive as JSON Lines. Geotagged messages are assigned to one of
//! the four analysis groups (inside/outside the region, during the crisis or
//! during a pre-crisis baseline window); messages without coordinates form
//! the unlabeled pool that the classifier is meant to label.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius used for every distance computation.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("missing required field `{0}`")]
    MissingField(&'static str),
    #[error("field `text` is empty")]
    EmptyText,
    #[error("latitude {0} out of range [-90, 90]")]
    LatitudeOutOfRange(f64),
    #[error("longitude {0} out of range [-180, 180]")]
    LongitudeOutOfRange(f64),
    #[error("radius must be strictly positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("time window start {start} is not before end {end}")]
    EmptyWindow {
        start: DateTime<Utc>,
        end: DateTime<Utc>,
    },
    #[error("tweet {0} has no coordinates and cannot be partitioned")]
    MissingGeo(String),
    #[error("cannot read corpus: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, IngestError> {
        // NaN fails both range checks.
        if !(-90.0..=90.0).contains(&lat) {
            return Err(IngestError::LatitudeOutOfRange(lat));
        }
        if !(-180.0..=180.0).contains(&lon) {
            return Err(IngestError::LongitudeOutOfRange(lon));
        }
        Ok(GeoPoint { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

impl<'de> Deserialize<'de> for GeoPoint {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            lat: f64,
            lon: f64,
        }
        let raw = Raw::deserialize(deserializer)?;
        GeoPoint::new(raw.lat, raw.lon).map_err(serde::de::Error::custom)
    }
}

/// A disc on the Earth's surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Region {
    pub epicenter: GeoPoint,
    radius_km: f64,
}

impl Region {
    pub fn new(epicenter: GeoPoint, radius_km: f64) -> Result<Self, IngestError> {
        if radius_km <= 0.0 || !radius_km.is_finite() {
            return Err(IngestError::NonPositiveRadius(radius_km));
        }
        Ok(Region {
            epicenter,
            radius_km,
        })
    }

    pub fn radius_km(&self) -> f64 {
        self.radius_km
    }

    /// Boundary-inclusive disc membership.
    pub fn contains(&self, point: &GeoPoint) -> bool {
        haversine_km(&self.epicenter, point) <= self.radius_km
    }
}

/// Half-open UTC interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TimeWindow {
    start: DateTime<Utc>,
    end: DateTime<Utc>,
}

impl TimeWindow {
    pub fn new(start: DateTime<Utc>, end: DateTime<Utc>) -> Result<Self, IngestError> {
        if start >= end {
            return Err(IngestError::EmptyWindow { start, end });
        }
        Ok(TimeWindow { start, end })
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.end
    }

    pub fn contains(&self, instant: &DateTime<Utc>) -> bool {
        self.start <= *instant && *instant < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTweet {
    pub id: String,
    pub text: String,
    pub created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geo: Option<GeoPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ark_tags: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ptb_tags: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk_tags: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PartitionLabel {
    #[serde(rename = "IR")]
    Ir,
    #[serde(rename = "OR")]
    Or,
    #[serde(rename = "PC_IR")]
    PcIr,
    #[serde(rename = "PC_OR")]
    PcOr,
    #[serde(rename = "UNASSIGNED")]
    Unassigned,
}

impl PartitionLabel {
    pub const ALL: [PartitionLabel; 5] = [
        PartitionLabel::Ir,
        PartitionLabel::Or,
        PartitionLabel::PcIr,
        PartitionLabel::PcOr,
        PartitionLabel::Unassigned,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PartitionLabel::Ir => "IR",
            PartitionLabel::Or => "OR",
            PartitionLabel::PcIr => "PC_IR",
            PartitionLabel::PcOr => "PC_OR",
            PartitionLabel::Unassigned => "UNASSIGNED",
        }
    }
}

impl fmt::Display for PartitionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Region plus the windows that define the four groups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartitionScheme {
    pub region: Region,
    pub crisis: TimeWindow,
    pub pre_crisis: Option<TimeWindow>,
}

/// Parse and validate one JSON Lines record. Unknown fields are ignored.
///
/// Tag layers are kept as given; their alignment with the token sequence is
/// checked later when the tweet is tokenized.
pub fn parse_tweet_record(line: &str) -> Result<RawTweet, IngestError> {
    #[derive(Deserialize)]
    struct Record {
        id: Option<String>,
        text: Option<String>,
        created_at: Option<DateTime<Utc>>,
        #[serde(default)]
        geo: Option<GeoPoint>,
        #[serde(default)]
        ark_tags: Option<Vec<String>>,
        #[serde(default)]
        ptb_tags: Option<Vec<String>>,
        #[serde(default)]
        chunk_tags: Option<Vec<String>>,
    }

    let record: Record = serde_json::from_str(line)?;
    let id = record.id.ok_or(IngestError::MissingField("id"))?;
    let text = record.text.ok_or(IngestError::MissingField("text"))?;
    let created_at = record
        .created_at
        .ok_or(IngestError::MissingField("created_at"))?;
    if text.is_empty() {
        return Err(IngestError::EmptyText);
    }
    Ok(RawTweet {
        id,
        text,
        created_at,
        geo: record.geo,
        ark_tags: record.ark_tags,
        ptb_tags: record.ptb_tags,
        chunk_tags: record.chunk_tags,
    })
}

/// Great-circle distance on a sphere of radius [`EARTH_RADIUS_KM`].
pub fn haversine_km(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

pub fn assign_partition(
    tweet: &RawTweet,
    scheme: &PartitionScheme,
) -> Result<PartitionLabel, IngestError> {
    let geo = tweet
        .geo
        .as_ref()
        .ok_or_else(|| IngestError::MissingGeo(tweet.id.clone()))?;
    let inside = scheme.region.contains(geo);
    let label = if scheme.crisis.contains(&tweet.created_at) {
        if inside {
            PartitionLabel::Ir
        } else {
            PartitionLabel::Or
        }
    } else if scheme
        .pre_crisis
        .is_some_and(|w| w.contains(&tweet.created_at))
    {
        if inside {
            PartitionLabel::PcIr
        } else {
            PartitionLabel::PcOr
        }
    } else {
        PartitionLabel::Unassigned
    };
    Ok(label)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedRecord {
    /// 1-based line number in the input.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionCounts {
    pub ir: usize,
    pub or: usize,
    pub pc_ir: usize,
    pub pc_or: usize,
    pub unassigned: usize,
    pub unlabeled: usize,
    pub skipped: usize,
    pub duplicates: usize,
    pub lines: usize,
    /// `|IR| / (|IR| + |OR|)`, absent when both groups are empty.
    pub imbalance_ratio: Option<f64>,
}

/// A loaded corpus. Immutable once built.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub groups: BTreeMap<PartitionLabel, Vec<RawTweet>>,
    /// Non-geotagged messages, in input order.
    pub unlabeled: Vec<RawTweet>,
    pub skipped: Vec<SkippedRecord>,
    pub lines: usize,
}

impl Corpus {
    pub fn group(&self, label: PartitionLabel) -> &[RawTweet] {
        self.groups.get(&label).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn counts(&self) -> PartitionCounts {
        let n = |l| self.group(l).len();
        let (ir, or) = (n(PartitionLabel::Ir), n(PartitionLabel::Or));
        PartitionCounts {
            ir,
            or,
            pc_ir: n(PartitionLabel::PcIr),
            pc_or: n(PartitionLabel::PcOr),
            unassigned: n(PartitionLabel::Unassigned),
            unlabeled: self.unlabeled.len(),
            skipped: self.skipped.len(),
            duplicates: self
                .skipped
                .iter()
                .filter(|s| s.reason.starts_with(DUPLICATE_REASON))
                .count(),
            lines: self.lines,
            imbalance_ratio: (ir + or > 0).then(|| ir as f64 / (ir + or) as f64),
        }
    }
}

const DUPLICATE_REASON: &str = "duplicate id";

pub fn load_corpus(
    path: impl AsRef<Path>,
    scheme: &PartitionScheme,
) -> Result<Corpus, IngestError> {
    let file = File::open(path)?;
    load_corpus_from_reader(file, scheme)
}

/// Records are parsed in parallel and assembled in input order. Bad records
/// (including repeated ids, where the first occurrence wins) are skipped and
/// reported rather than aborting the load.
pub fn load_corpus_from_reader<R: Read>(
    reader: R,
    scheme: &PartitionScheme,
) -> Result<Corpus, IngestError> {
    let lines = BufReader::new(reader)
        .lines()
        .collect::<Result<Vec<_>, _>>()?;
    let parsed: Vec<Result<RawTweet, IngestError>> = lines
        .par_iter()
        .map(|line| {
            if line.trim().is_empty() {
                Err(IngestError::MissingField("id"))
            } else {
                parse_tweet_record(line)
            }
        })
        .collect();

    let mut corpus = Corpus {
        lines: lines.len(),
        ..Corpus::default()
    };
    for label in PartitionLabel::ALL {
        corpus.groups.insert(label, Vec::new());
    }
    let mut seen = HashSet::new();
    for (idx, result) in parsed.into_iter().enumerate() {
        let line = idx + 1;
        let tweet = match result {
            Ok(t) => t,
            Err(e) => {
                let reason = if lines[idx].trim().is_empty() {
                    "empty line".to_string()
                } else {
                    e.to_string()
                };
                corpus.skipped.push(SkippedRecord { line, reason });
                continue;
            }
        };
        if !seen.insert(tweet.id.clone()) {
            corpus.skipped.push(SkippedRecord {
                line,
                reason: format!("{DUPLICATE_REASON} {}", tweet.id),
            });
            continue;
        }
        if tweet.geo.is_some() {
            let label = assign_partition(&tweet, scheme)?;
            corpus.groups.entry(label).or_default().push(tweet);
        } else {
            corpus.unlabeled.push(tweet);
        }
    }
    let counts = corpus.counts();
    log::info!(
        "loaded {} lines: IR={} OR={} PC_IR={} PC_OR={} unassigned={} unlabeled={} skipped={}",
        counts.lines,
        counts.ir,
        counts.or,
        counts.pc_ir,
        counts.pc_or,
        counts.unassigned,
        counts.unlabeled,
        counts.skipped
    );
    Ok(corpus)
}
