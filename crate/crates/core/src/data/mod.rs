//! Records, ingestion, featurization and the synthetic planted-community generator.

mod features;
mod io;
mod synthetic;
pub mod text;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{build_graph, BipartiteGraph, EdgeKind, GraphError, NodeIndex, NodeRef};
use crate::labeling::{HashtagLexicon, LabelError, StanceLabel, UserLabel};
use crate::model::NodeFeatures;
use crate::tensor::Tensor;

pub use features::{featurize, FeatureProvider, FeatureSpec};
pub use io::{
    read_dataset, read_json, read_jsonl, write_dataset, write_json, write_jsonl, DatasetPaths, FEATURES_FILE,
    INTERACTIONS_FILE, LABELS_FILE, TWEETS_FILE, USERS_FILE,
};
pub use synthetic::{generate_synthetic, SyntheticDataset, SyntheticParams};
pub use text::{clean_text, compose_profile};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error("{0}")]
    Reference(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error("features: {0}")]
    Feature(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("synthetic parameters: {0}")]
    Synthetic(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub id: String,
    #[serde(default)]
    pub profile: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra: Option<BTreeMap<String, String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    pub author_id: String,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub hashtags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retweet_of: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub user_id: String,
    pub tweet_id: String,
    pub kind: EdgeKind,
}

/// One line of the features file; `node` is `u:<id>` or `t:<id>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub node: String,
    pub vec: Vec<f64>,
}

pub fn user_key(id: &str) -> String {
    format!("u:{id}")
}

pub fn tweet_key(id: &str) -> String {
    format!("t:{id}")
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub users: Vec<UserRecord>,
    pub tweets: Vec<TweetRecord>,
    /// Explicit interactions; derived from authorship and retweets when absent.
    pub interactions: Option<Vec<InteractionRecord>>,
    pub labels: Vec<UserLabel>,
    pub features: Option<Vec<FeatureRecord>>,
}

impl Dataset {
    /// Unique ids, resolvable authors, retweet targets and labeled users.
    pub fn validate(&self) -> Result<(), DataError> {
        let mut users = HashSet::new();
        for u in &self.users {
            if !users.insert(u.id.as_str()) {
                return Err(DataError::DuplicateId {
                    kind: "user",
                    id: u.id.clone(),
                });
            }
        }
        let mut tweets = HashSet::new();
        for t in &self.tweets {
            if !tweets.insert(t.id.as_str()) {
                return Err(DataError::DuplicateId {
                    kind: "tweet",
                    id: t.id.clone(),
                });
            }
        }
        for t in &self.tweets {
            if !users.contains(t.author_id.as_str()) {
                return Err(DataError::Reference(format!(
                    "tweet `{}` has unknown author `{}`",
                    t.id, t.author_id
                )));
            }
            if let Some(target) = &t.retweet_of {
                if !tweets.contains(target.as_str()) {
                    return Err(DataError::Reference(format!(
                        "tweet `{}` retweets unknown tweet `{target}`",
                        t.id
                    )));
                }
            }
        }
        let map = self.tweet_map();
        for t in &self.tweets {
            root_in(&map, &t.id)?;
        }
        let mut labeled = HashSet::new();
        for l in &self.labels {
            if !users.contains(l.user_id.as_str()) {
                return Err(DataError::Reference(format!("label for unknown user `{}`", l.user_id)));
            }
            if !labeled.insert(l.user_id.as_str()) {
                return Err(DataError::DuplicateId {
                    kind: "label",
                    id: l.user_id.clone(),
                });
            }
        }
        Ok(())
    }

    fn tweet_map(&self) -> HashMap<&str, &TweetRecord> {
        self.tweets.iter().map(|t| (t.id.as_str(), t)).collect()
    }

    /// Follows `retweet_of` to the original tweet.
    pub fn root_of<'a>(&'a self, id: &'a str) -> Result<&'a str, DataError> {
        root_in(&self.tweet_map(), id)
    }

    /// Ids of original tweets, which become the graph's tweet nodes.
    pub fn original_tweet_ids(&self) -> Vec<String> {
        self.tweets
            .iter()
            .filter(|t| t.retweet_of.is_none())
            .map(|t| t.id.clone())
            .collect()
    }

    /// Post edges from authorship, retweet edges to the root tweet.
    pub fn derived_interactions(&self) -> Result<Vec<InteractionRecord>, DataError> {
        let map = self.tweet_map();
        self.tweets
            .iter()
            .map(|t| {
                Ok(match &t.retweet_of {
                    None => InteractionRecord {
                        user_id: t.author_id.clone(),
                        tweet_id: t.id.clone(),
                        kind: EdgeKind::Post,
                    },
                    Some(_) => InteractionRecord {
                        user_id: t.author_id.clone(),
                        tweet_id: root_in(&map, &t.id)?.to_string(),
                        kind: EdgeKind::Retweet,
                    },
                })
            })
            .collect()
    }

    pub fn interactions(&self) -> Result<Vec<InteractionRecord>, DataError> {
        match &self.interactions {
            Some(explicit) => Ok(explicit.clone()),
            None => self.derived_interactions(),
        }
    }

    pub fn graph(&self) -> Result<(BipartiteGraph, NodeIndex), DataError> {
        let users: Vec<String> = self.users.iter().map(|u| u.id.clone()).collect();
        let edges: Vec<(String, String, EdgeKind)> = self
            .interactions()?
            .into_iter()
            .map(|i| (i.user_id, i.tweet_id, i.kind))
            .collect();
        Ok(build_graph(&users, &self.original_tweet_ids(), &edges)?)
    }

    /// Labeled users as graph nodes, in label-file order.
    pub fn labeled_nodes(&self, index: &NodeIndex) -> Result<Vec<(NodeRef, StanceLabel)>, DataError> {
        self.labels
            .iter()
            .map(|l| {
                index
                    .user(&l.user_id)
                    .map(|u| (u, l.label))
                    .ok_or_else(|| DataError::Reference(format!("label for unknown user `{}`", l.user_id)))
            })
            .collect()
    }

    /// `(author, hashtags)` for every post and retweet.
    pub fn authored_hashtags(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.tweets
            .iter()
            .map(|t| (t.author_id.as_str(), t.hashtags.as_slice()))
    }

    /// Feature rows for every graph node. Users are featurized from their
    /// composed profile and tweets from their text, both cleaned first.
    pub fn node_features(
        &self,
        index: &NodeIndex,
        provider: &FeatureProvider,
        lexicon: Option<&HashtagLexicon>,
    ) -> Result<NodeFeatures, DataError> {
        let dim = provider.dim();
        if dim == 0 {
            return Err(DataError::Feature("feature dim must be at least 1".into()));
        }
        let users: HashMap<&str, &UserRecord> = self.users.iter().map(|u| (u.id.as_str(), u)).collect();
        let tweets = self.tweet_map();
        let mut user_rows = Vec::with_capacity(index.user_ids.len() * dim);
        for id in &index.user_ids {
            let text = users.get(id.as_str()).map(|u| compose_profile(u)).unwrap_or_default();
            user_rows.extend(checked(
                featurize(&clean_text(&text, lexicon), provider, &user_key(id))?,
                dim,
                id,
            )?);
        }
        let mut tweet_rows = Vec::with_capacity(index.tweet_ids.len() * dim);
        for id in &index.tweet_ids {
            let text = tweets.get(id.as_str()).map(|t| t.text.as_str()).unwrap_or_default();
            tweet_rows.extend(checked(
                featurize(&clean_text(text, lexicon), provider, &tweet_key(id))?,
                dim,
                id,
            )?);
        }
        let to_err = |e: crate::tensor::TensorError| DataError::Feature(e.to_string());
        let users = Tensor::matrix(index.user_ids.len(), dim, user_rows).map_err(to_err)?;
        let tweets = Tensor::matrix(index.tweet_ids.len(), dim, tweet_rows).map_err(to_err)?;
        NodeFeatures::new(users, tweets).map_err(|e| DataError::Feature(e.to_string()))
    }
}

fn root_in<'a>(map: &HashMap<&'a str, &'a TweetRecord>, id: &'a str) -> Result<&'a str, DataError> {
    let mut current = id;
    for _ in 0..=map.len() {
        let t = map
            .get(current)
            .ok_or_else(|| DataError::Reference(format!("unknown tweet `{current}`")))?;
        match &t.retweet_of {
            None => return Ok(current),
            Some(next) => current = next,
        }
    }
    Err(DataError::Reference(format!("retweet cycle through `{id}`")))
}

fn checked(v: Vec<f64>, dim: usize, id: &str) -> Result<Vec<f64>, DataError> {
    if v.len() != dim {
        return Err(DataError::Feature(format!(
            "`{id}` has {} entries, expected {dim}",
            v.len()
        )));
    }
    Ok(v)
}
