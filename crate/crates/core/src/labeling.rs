//! Weak stance labels from a hashtag lexicon.
//!
//! A tweet is labeled when every lexicon hashtag it carries points at the
//! same candidate. A user's positive ratio is the share of their labeled
//! tweets (posts and retweets) that support the positive candidate, and the
//! user label thresholds that ratio.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabelError {
    #[error("lexicon is empty")]
    EmptyLexicon,
    #[error("lexicon names {0} candidates, expected at most 2")]
    TooManyCandidates(usize),
    #[error("positive candidate `{0}` has no hashtags in the lexicon")]
    UnknownPositive(String),
    #[error("hashtag `{tag}` maps to both `{first}` and `{second}`")]
    ConflictingEntry { tag: String, first: String, second: String },
    #[error("user has no labeled tweets")]
    NoLabeledTweets,
    #[error("threshold {0} outside [0, 1]")]
    BadThreshold(f64),
    #[error("histogram needs at least one bin")]
    NoBins,
    #[error("ratio {0} outside [0, 1]")]
    RatioOutOfRange(f64),
}

/// Binary stance; `Positive` is whichever candidate the lexicon names positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum StanceLabel {
    Negative,
    Positive,
}

impl StanceLabel {
    pub fn as_index(self) -> usize {
        self as usize
    }
}

impl From<StanceLabel> for u8 {
    fn from(l: StanceLabel) -> u8 {
        l as u8
    }
}

impl TryFrom<u8> for StanceLabel {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            0 => Ok(StanceLabel::Negative),
            1 => Ok(StanceLabel::Positive),
            other => Err(format!("stance label must be 0 or 1, got {other}")),
        }
    }
}

/// Strips a leading `#`, NFC-normalizes and lowercases.
pub fn normalize_hashtag(tag: &str) -> String {
    let trimmed = tag.trim();
    let bare = trimmed.strip_prefix('#').unwrap_or(trimmed);
    bare.nfc().collect::<String>().to_lowercase()
}

/// On-disk lexicon layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconFile {
    pub positive_candidate: String,
    pub entries: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HashtagLexicon {
    positive: String,
    entries: HashMap<String, String>,
}

impl HashtagLexicon {
    pub fn new<I, K, V>(positive_candidate: &str, entries: I) -> Result<Self, LabelError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: Into<String>,
    {
        let mut map: HashMap<String, String> = HashMap::new();
        for (tag, candidate) in entries {
            let tag = normalize_hashtag(tag.as_ref());
            let candidate = candidate.into();
            if let Some(prev) = map.get(&tag) {
                if *prev != candidate {
                    return Err(LabelError::ConflictingEntry {
                        tag,
                        first: prev.clone(),
                        second: candidate,
                    });
                }
            }
            map.insert(tag, candidate);
        }
        if map.is_empty() {
            return Err(LabelError::EmptyLexicon);
        }
        let candidates: BTreeSet<&String> = map.values().collect();
        if candidates.len() > 2 {
            return Err(LabelError::TooManyCandidates(candidates.len()));
        }
        if !candidates.contains(&positive_candidate.to_string()) {
            return Err(LabelError::UnknownPositive(positive_candidate.to_string()));
        }
        Ok(Self {
            positive: positive_candidate.to_string(),
            entries: map,
        })
    }

    pub fn from_file(file: LexiconFile) -> Result<Self, LabelError> {
        Self::new(&file.positive_candidate, file.entries)
    }

    pub fn to_file(&self) -> LexiconFile {
        LexiconFile {
            positive_candidate: self.positive.clone(),
            entries: self.entries.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
        }
    }

    pub fn positive_candidate(&self) -> &str {
        &self.positive
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn candidate_of(&self, hashtag: &str) -> Option<&str> {
        self.entries.get(&normalize_hashtag(hashtag)).map(String::as_str)
    }

    pub fn contains(&self, hashtag: &str) -> bool {
        self.candidate_of(hashtag).is_some()
    }

    pub fn stance_of(&self, candidate: &str) -> StanceLabel {
        if candidate == self.positive {
            StanceLabel::Positive
        } else {
            StanceLabel::Negative
        }
    }
}

/// Label of a tweet from its hashtags. Hashtags outside the lexicon are ignored.
pub fn label_tweet<S: AsRef<str>>(hashtags: &[S], lexicon: &HashtagLexicon) -> Option<StanceLabel> {
    let mut found: Option<&str> = None;
    for tag in hashtags {
        if let Some(c) = lexicon.candidate_of(tag.as_ref()) {
            match found {
                None => found = Some(c),
                Some(prev) if prev != c => return None,
                Some(_) => {}
            }
        }
    }
    found.map(|c| lexicon.stance_of(c))
}

/// Share of positive labels.
pub fn user_positive_ratio(labels: &[StanceLabel]) -> Result<f64, LabelError> {
    if labels.is_empty() {
        return Err(LabelError::NoLabeledTweets);
    }
    let positive = labels.iter().filter(|l| **l == StanceLabel::Positive).count();
    Ok(positive as f64 / labels.len() as f64)
}

/// Threshold rule for user labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelPolicy {
    pub threshold: f64,
    /// Label assigned when the ratio equals the threshold exactly.
    pub tie_positive: bool,
}

impl Default for LabelPolicy {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            tie_positive: true,
        }
    }
}

impl LabelPolicy {
    pub fn new(threshold: f64) -> Result<Self, LabelError> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(LabelError::BadThreshold(threshold));
        }
        Ok(Self {
            threshold,
            ..Self::default()
        })
    }

    pub fn apply(&self, ratio: f64) -> StanceLabel {
        let positive = if ratio == self.threshold {
            self.tie_positive
        } else {
            ratio > self.threshold
        };
        if positive {
            StanceLabel::Positive
        } else {
            StanceLabel::Negative
        }
    }
}

/// `1` when `ratio >= threshold`, else `0`.
pub fn label_user(ratio: f64, threshold: f64) -> StanceLabel {
    LabelPolicy {
        threshold,
        tie_positive: true,
    }
    .apply(ratio)
}

/// Equal-width bin counts over `[0, 1]`. A value on an interior edge goes to
/// the upper bin; `1.0` goes to the last bin.
pub fn ratio_histogram(ratios: &[f64], bins: usize) -> Result<Vec<usize>, LabelError> {
    if bins == 0 {
        return Err(LabelError::NoBins);
    }
    let mut counts = vec![0; bins];
    for &r in ratios {
        if !(0.0..=1.0).contains(&r) {
            return Err(LabelError::RatioOutOfRange(r));
        }
        let bin = ((r * bins as f64).floor() as usize).min(bins - 1);
        counts[bin] += 1;
    }
    Ok(counts)
}

/// One line of `labels.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserLabel {
    pub user_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_u: Option<f64>,
    pub label: StanceLabel,
    #[serde(default)]
    pub labeled_tweet_count: usize,
}

/// Labels every user with at least one labeled tweet, in `user_ids` order.
/// `tweets` yields `(author id, hashtags)` for posts and retweets alike.
pub fn label_users<'a, I>(
    user_ids: &[String],
    tweets: I,
    lexicon: &HashtagLexicon,
    policy: &LabelPolicy,
) -> Vec<UserLabel>
where
    I: IntoIterator<Item = (&'a str, &'a [String])>,
{
    let mut per_user: HashMap<&str, Vec<StanceLabel>> = HashMap::new();
    for (author, tags) in tweets {
        if let Some(l) = label_tweet(tags, lexicon) {
            per_user.entry(author).or_default().push(l);
        }
    }
    user_ids
        .iter()
        .filter_map(|id| {
            let labels = per_user.get(id.as_str())?;
            let ratio = user_positive_ratio(labels).ok()?;
            Some(UserLabel {
                user_id: id.clone(),
                f_u: Some(ratio),
                label: policy.apply(ratio),
                labeled_tweet_count: labels.len(),
            })
        })
        .collect()
}
