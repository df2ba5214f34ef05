//! Jensen-Shannon divergence between word distributions of tweet groups.

use std::collections::BTreeMap;

use chrono::{FixedOffset, NaiveDate, Timelike};
use serde::Serialize;
use thiserror::Error;

use crate::ingest::{RawTweet, Region};
use crate::text::{tokenize, Token};

#[derive(Debug, Error, PartialEq)]
pub enum DivergenceError {
    #[error("cannot build a distribution from zero tokens")]
    NoTokens,
    #[error("no group has any tokens")]
    NoGroups,
    #[error("invalid hour range {start}..{end}")]
    InvalidHourRange { start: u32, end: u32 },
    #[error("invalid UTC offset of {0} minutes")]
    InvalidOffset(i32),
}

/// Unigram relative frequencies. All stored probabilities are positive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenDistribution {
    probs: BTreeMap<String, f64>,
}

impl TokenDistribution {
    pub fn from_counts(counts: BTreeMap<String, u64>) -> Result<Self, DivergenceError> {
        let total: u64 = counts.values().sum();
        if total == 0 {
            return Err(DivergenceError::NoTokens);
        }
        let probs = counts
            .into_iter()
            .filter(|(_, c)| *c > 0)
            .map(|(k, c)| (k, c as f64 / total as f64))
            .collect();
        Ok(TokenDistribution { probs })
    }

    pub fn support_size(&self) -> usize {
        self.probs.len()
    }

    pub fn prob(&self, token: &str) -> f64 {
        self.probs.get(token).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.probs.iter().map(|(k, &p)| (k.as_str(), p))
    }
}

/// Distribution over all tokens of all `tweets`.
pub fn word_distribution<'a, I, T>(tweets: I) -> Result<TokenDistribution, DivergenceError>
where
    I: IntoIterator<Item = &'a T>,
    T: AsRef<[Token]> + 'a + ?Sized,
{
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for tweet in tweets {
        for token in tweet.as_ref() {
            *counts.entry(token.as_str().to_string()).or_insert(0) += 1;
        }
    }
    TokenDistribution::from_counts(counts)
}

/// One key's contribution `p log2(2p/(p+q)) + q log2(2q/(p+q))`, halved.
fn js_term(p: f64, q: f64) -> f64 {
    let sum = p + q;
    let side = |x: f64| {
        if x > 0.0 {
            x * (2.0 * x / sum).log2()
        } else {
            0.0
        }
    };
    0.5 * (side(p) + side(q))
}

/// Base-2 Jensen-Shannon divergence, in `[0, 1]`.
///
/// Keys are visited in sorted order and each term is symmetric in its
/// arguments, so swapping `p` and `q` gives a bit-identical result. The sum
/// is divided by the mixture mass accumulated in the same pass, which makes
/// disjoint supports come out at exactly 1.
pub fn js_divergence(p: &TokenDistribution, q: &TokenDistribution) -> f64 {
    let mut a = p.probs.iter().peekable();
    let mut b = q.probs.iter().peekable();
    let mut divergence = 0.0;
    let mut mass = 0.0;
    loop {
        let (pi, qi) = match (a.peek(), b.peek()) {
            (None, None) => break,
            (Some((_, &pv)), None) => {
                a.next();
                (pv, 0.0)
            }
            (None, Some((_, &qv))) => {
                b.next();
                (0.0, qv)
            }
            (Some((ka, &pv)), Some((kb, &qv))) => match ka.cmp(kb) {
                std::cmp::Ordering::Less => {
                    a.next();
                    (pv, 0.0)
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                    (0.0, qv)
                }
                std::cmp::Ordering::Equal => {
                    a.next();
                    b.next();
                    (pv, qv)
                }
            },
        };
        divergence += js_term(pi, qi);
        mass += 0.5 * (pi + qi);
    }
    if mass <= 0.0 {
        return 0.0;
    }
    (divergence / mass).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// `values` divided by the largest entry (min-max with the diagonal's 0
    /// as minimum); all zeros when every entry is zero.
    pub normalized_values: Vec<Vec<f64>>,
}

impl DivergenceMatrix {
    pub fn from_distributions(labels: Vec<String>, dists: &[TokenDistribution]) -> Self {
        let n = dists.len();
        let mut values = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let d = js_divergence(&dists[i], &dists[j]);
                values[i][j] = d;
                values[j][i] = d;
            }
        }
        let max = values.iter().flatten().copied().fold(0.0, f64::max);
        let normalized_values = values
            .iter()
            .map(|row| {
                row.iter()
                    .map(|v| if max > 0.0 { v / max } else { 0.0 })
                    .collect()
            })
            .collect();
        DivergenceMatrix {
            labels,
            values,
            normalized_values,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.len()).all(|i| {
            self.values[i][i] == 0.0
                && (0..self.len()).all(|j| self.values[i][j] == self.values[j][i])
        })
    }

    /// CSV with a header row of labels; each data row starts with its label.
    pub fn to_csv(&self, normalized: bool) -> String {
        let values = if normalized {
            &self.normalized_values
        } else {
            &self.values
        };
        let mut out = String::from("group");
        for l in &self.labels {
            out.push(',');
            out.push_str(&csv_field(l));
        }
        out.push('\n');
        for (label, row) in self.labels.iter().zip(values) {
            out.push_str(&csv_field(label));
            for v in row {
                out.push_str(&format!(",{v:.6}"));
            }
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Result of a matrix computation plus groups that were dropped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixReport {
    pub matrix: DivergenceMatrix,
    pub warnings: Vec<String>,
}

/// Pairwise divergences between named groups of token sequences. Groups with
/// no tokens are dropped with a warning.
pub fn regional_divergence_matrix<T: AsRef<[Token]>>(
    groups: &[(String, Vec<T>)],
) -> Result<MatrixReport, DivergenceError> {
    let mut labels = Vec::new();
    let mut dists = Vec::new();
    let mut warnings = Vec::new();
    for (name, tweets) in groups {
        match word_distribution(tweets.iter()) {
            Ok(d) => {
                labels.push(name.clone());
                dists.push(d);
            }
            Err(DivergenceError::NoTokens) => {
                warnings.push(format!("group `{name}` has no tokens; dropped"));
            }
            Err(e) => return Err(e),
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    if dists.is_empty() {
        return Err(DivergenceError::NoGroups);
    }
    Ok(MatrixReport {
        matrix: DivergenceMatrix::from_distributions(labels, &dists),
        warnings,
    })
}

/// Hourly divergence for tweets inside `region` on local calendar `day`.
///
/// Hours are local to a fixed UTC offset (`offset_minutes`, east positive)
/// and cover `start_hour..end_hour`. Hours with no tokens are dropped.
pub fn hourly_divergence_matrix(
    tweets: &[RawTweet],
    region: &Region,
    day: NaiveDate,
    start_hour: u32,
    end_hour: u32,
    offset_minutes: i32,
) -> Result<MatrixReport, DivergenceError> {
    if start_hour >= end_hour || end_hour > 24 {
        return Err(DivergenceError::InvalidHourRange {
            start: start_hour,
            end: end_hour,
        });
    }
    let offset = FixedOffset::east_opt(offset_minutes * 60)
        .ok_or(DivergenceError::InvalidOffset(offset_minutes))?;
    let mut by_hour: BTreeMap<u32, Vec<Vec<Token>>> =
        (start_hour..end_hour).map(|h| (h, Vec::new())).collect();
    for tweet in tweets {
        let Some(geo) = &tweet.geo else { continue };
        if !region.contains(geo) {
            continue;
        }
        let local = tweet.created_at.with_timezone(&offset);
        if local.date_naive() != day {
            continue;
        }
        if let Some(bucket) = by_hour.get_mut(&local.hour()) {
            bucket.push(tokenize(&tweet.text));
        }
    }
    let groups: Vec<(String, Vec<Vec<Token>>)> = by_hour
        .into_iter()
        .map(|(h, toks)| (format!("{h:02}:00"), toks))
        .collect();
    regional_divergence_matrix(&groups)
}
