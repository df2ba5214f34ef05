//! Twitter-aware tokenization, tag-layer alignment and a rule-based ARK
//! fallback tagger.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::RawTweet;

/// A lowercased, whitespace-free token.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Token(String);

impl Token {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TagLayer {
    #[serde(rename = "ark")]
    Ark,
    #[serde(rename = "ptb")]
    Ptb,
    #[serde(rename = "chunk")]
    Chunk,
}

impl fmt::Display for TagLayer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TagLayer::Ark => "ark",
            TagLayer::Ptb => "ptb",
            TagLayer::Chunk => "chunk",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("tweet {tweet_id}: {layer} layer has {tags} tags for {tokens} tokens")]
pub struct AlignmentError {
    pub tweet_id: String,
    pub layer: TagLayer,
    pub tokens: usize,
    pub tags: usize,
}

const URL_PREFIXES: [&str; 3] = ["http://", "https://", "www."];

fn is_url(s: &str) -> bool {
    URL_PREFIXES
        .iter()
        .any(|p| s.get(..p.len()).is_some_and(|h| h.eq_ignore_ascii_case(p)))
}

/// The suffix of `original` whose lowercase form is `lowered`, so URLs can
/// keep their case (short-link paths are case-sensitive).
fn original_suffix<'a>(original: &'a str, lowered: &'a str) -> &'a str {
    original
        .char_indices()
        .map(|(i, _)| &original[i..])
        .find(|rest| is_url(rest) && rest.to_lowercase() == lowered)
        .unwrap_or(lowered)
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Length in bytes of a leading `@name` / `#tag`, if `s` starts with one.
fn handle_len(s: &str) -> Option<usize> {
    let mut chars = s.char_indices();
    match chars.next() {
        Some((_, '@' | '#')) => {}
        _ => return None,
    }
    let end = chars
        .find(|&(_, c)| !is_word_char(c))
        .map_or(s.len(), |(i, _)| i);
    (end > 1).then_some(end)
}

/// Split `text` into lowercased tokens.
///
/// Rules, applied per whitespace-separated chunk:
/// URLs (`http://`, `https://`, `www.`, any case) run to the end of the
/// chunk and keep their original case;
/// `@mentions` and `#hashtags` span a run of word characters;
/// any other leading or trailing non-alphanumeric character becomes its own
/// token, so internal apostrophes (`i'm`) and hyphens stay attached.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let lowered = chunk.to_lowercase();
        split_chunk(chunk, &lowered, &mut out);
    }
    out
}

fn split_chunk(original: &str, mut rest: &str, out: &mut Vec<Token>) {
    let push = |out: &mut Vec<Token>, s: &str| out.push(Token(s.to_string()));
    loop {
        if rest.is_empty() {
            return;
        }
        if is_url(rest) {
            push(out, original_suffix(original, rest));
            return;
        }
        if let Some(len) = handle_len(rest) {
            push(out, &rest[..len]);
            rest = &rest[len..];
            continue;
        }
        let first = rest.chars().next().expect("non-empty");
        if !first.is_alphanumeric() {
            push(out, &rest[..first.len_utf8()]);
            rest = &rest[first.len_utf8()..];
            continue;
        }
        // Word core: everything up to the trailing run of punctuation.
        let core_end = rest
            .char_indices()
            .rfind(|(_, c)| c.is_alphanumeric())
            .map(|(i, c)| i + c.len_utf8())
            .expect("starts with alphanumeric");
        push(out, &rest[..core_end]);
        for c in rest[core_end..].chars() {
            out.push(Token(c.to_string()));
        }
        return;
    }
}

/// Tokens of a tweet with whichever tag layers were supplied.
///
/// Each present layer has exactly one tag per token; layers are all-or-nothing
/// for the whole tweet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedTweet {
    id: String,
    tokens: Vec<Token>,
    ark: Option<Vec<String>>,
    ptb: Option<Vec<String>>,
    chunk: Option<Vec<String>>,
}

/// Borrowed view of one token with its tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaggedToken<'a> {
    pub token: &'a Token,
    pub ark_tag: Option<&'a str>,
    pub ptb_tag: Option<&'a str>,
    pub chunk_tag: Option<&'a str>,
}

impl TaggedTweet {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn layer(&self, layer: TagLayer) -> Option<&[String]> {
        match layer {
            TagLayer::Ark => self.ark.as_deref(),
            TagLayer::Ptb => self.ptb.as_deref(),
            TagLayer::Chunk => self.chunk.as_deref(),
        }
    }

    pub fn has_layer(&self, layer: TagLayer) -> bool {
        self.layer(layer).is_some()
    }

    pub fn tagged_tokens(&self) -> impl Iterator<Item = TaggedToken<'_>> {
        fn tag(layer: &Option<Vec<String>>, i: usize) -> Option<&str> {
            layer.as_ref().map(|v| v[i].as_str())
        }
        self.tokens
            .iter()
            .enumerate()
            .map(move |(i, token)| TaggedToken {
                token,
                ark_tag: tag(&self.ark, i),
                ptb_tag: tag(&self.ptb, i),
                chunk_tag: tag(&self.chunk, i),
            })
    }

    /// Fill the ARK layer with [`fallback_ark_tag`] output when it is absent.
    pub fn with_fallback_ark(mut self) -> Self {
        if self.ark.is_none() {
            self.ark = Some(fallback_ark_tag(&self.tokens));
        }
        self
    }

    /// Tokenize a raw record and align its tag layers.
    pub fn from_raw(raw: &RawTweet) -> Result<Self, AlignmentError> {
        attach_tags(
            &raw.id,
            tokenize(&raw.text),
            raw.ark_tags.clone(),
            raw.ptb_tags.clone(),
            raw.chunk_tags.clone(),
        )
    }
}

impl AsRef<[Token]> for TaggedTweet {
    fn as_ref(&self) -> &[Token] {
        &self.tokens
    }
}

pub fn attach_tags(
    tweet_id: &str,
    tokens: Vec<Token>,
    ark: Option<Vec<String>>,
    ptb: Option<Vec<String>>,
    chunk: Option<Vec<String>>,
) -> Result<TaggedTweet, AlignmentError> {
    for (layer, tags) in [
        (TagLayer::Ark, &ark),
        (TagLayer::Ptb, &ptb),
        (TagLayer::Chunk, &chunk),
    ] {
        if let Some(tags) = tags {
            if tags.len() != tokens.len() {
                return Err(AlignmentError {
                    tweet_id: tweet_id.to_string(),
                    layer,
                    tokens: tokens.len(),
                    tags: tags.len(),
                });
            }
        }
    }
    Ok(TaggedTweet {
        id: tweet_id.to_string(),
        tokens,
        ark,
        ptb,
        chunk,
    })
}

// Closed lists for the fallback tagger.

const PREPOSITIONS: &[&str] = &[
    "about",
    "above",
    "across",
    "after",
    "against",
    "along",
    "among",
    "around",
    "at",
    "before",
    "behind",
    "below",
    "beneath",
    "beside",
    "between",
    "beyond",
    "by",
    "despite",
    "down",
    "during",
    "except",
    "for",
    "from",
    "in",
    "inside",
    "into",
    "near",
    "of",
    "off",
    "on",
    "onto",
    "outside",
    "over",
    "past",
    "since",
    "through",
    "throughout",
    "till",
    "to",
    "toward",
    "towards",
    "under",
    "until",
    "upon",
    "via",
    "with",
    "within",
    "without",
];

const DETERMINERS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "my", "your", "his", "her", "its", "our",
    "their", "some", "any", "no", "every", "each", "all", "both", "either", "neither", "another",
];

const NOMINAL_VERBAL: &[&str] = &[
    "i'm", "im", "i've", "i'll", "i'd", "you're", "you've", "you'll", "you'd", "he's", "he'll",
    "he'd", "she's", "she'll", "she'd", "it's", "it'll", "we're", "we've", "we'll", "we'd",
    "they're", "they've", "they'll", "they'd", "that's", "there's", "here's", "what's", "who's",
    "where's", "how's", "let's",
];

const VERBS: &[&str] = &[
    "am", "is", "are", "was", "were", "be", "been", "being", "have", "has", "had", "do", "does",
    "did", "will", "would", "can", "could", "should", "shall", "may", "might", "must", "go",
    "goes", "went", "gone", "get", "gets", "got", "make", "made", "take", "took", "see", "saw",
    "seen", "hear", "heard", "know", "knew", "think", "thought", "feel", "felt", "say", "said",
    "pray", "need", "help", "stay", "run", "ran", "hope", "want", "love", "hate", "let", "come",
    "came", "hit", "lost", "left", "keep", "kept", "hold", "told", "tell", "find", "found",
    "don't", "doesn't", "didn't", "can't", "won't", "isn't", "aren't", "wasn't", "weren't",
];

const ADJECTIVES: &[&str] = &[
    "safe", "good", "bad", "sad", "scary", "great", "ok", "okay", "crazy", "terrible", "horrible",
    "big", "small", "new", "old", "many", "much", "more", "most", "high", "low", "hard", "dead",
    "injured", "alive", "ready", "sure", "fine", "real", "true", "huge", "awful", "sick", "best",
    "worst", "whole", "strong", "heavy", "dark", "cold", "wet", "insane", "unreal", "other",
];

const ADVERBS: &[&str] = &[
    "not",
    "very",
    "so",
    "now",
    "here",
    "there",
    "just",
    "still",
    "too",
    "also",
    "really",
    "never",
    "always",
    "again",
    "already",
    "soon",
    "even",
    "back",
    "ever",
    "only",
    "almost",
    "away",
    "then",
    "today",
    "tonight",
    "yet",
    "everywhere",
    "somewhere",
    "nowhere",
];

const ADJECTIVE_SUFFIXES: &[&str] = &["ous", "ful", "ive", "able", "ible", "less", "ish"];

fn is_punctuation(s: &str) -> bool {
    s.chars().all(|c| !c.is_alphanumeric())
}

fn is_numeric(s: &str) -> bool {
    s.chars().any(|c| c.is_ascii_digit())
        && s.chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '.' | ',' | ':' | '/' | '-' | '%'))
}

fn lexical_tag(word: &str) -> &'static str {
    if VERBS.contains(&word) {
        "V"
    } else if ADJECTIVES.contains(&word) {
        "A"
    } else if ADVERBS.contains(&word) || (word.len() > 4 && word.ends_with("ly")) {
        "R"
    } else if (word.len() > 4 && word.ends_with("ing")) || (word.len() > 3 && word.ends_with("ed"))
    {
        "V"
    } else if word.len() > 4 && ADJECTIVE_SUFFIXES.iter().any(|s| word.ends_with(s)) {
        "A"
    } else {
        "N"
    }
}

/// Assign one ARK-style tag per token with ordered rules: mentions `@`,
/// hashtags `#`, URLs `U`, punctuation `!`, prepositions `P`, determiners
/// `D`, nominal+verbal contractions `L`, numerals `$`, then a small lexicon
/// and suffix heuristic over `V`/`A`/`R` with `N` as the default.
pub fn fallback_ark_tag(tokens: &[Token]) -> Vec<String> {
    tokens
        .iter()
        .map(|t| {
            let w = t.as_str();
            let tag = if w.len() > 1 && w.starts_with('@') {
                "@"
            } else if w.len() > 1 && w.starts_with('#') {
                "#"
            } else if is_url(w) {
                "U"
            } else if is_punctuation(w) {
                "!"
            } else if PREPOSITIONS.contains(&w) {
                "P"
            } else if DETERMINERS.contains(&w) {
                "D"
            } else if NOMINAL_VERBAL.contains(&w) {
                "L"
            } else if is_numeric(w) {
                "$"
            } else {
                lexical_tag(w)
            };
            tag.to_string()
        })
        .collect()
}
