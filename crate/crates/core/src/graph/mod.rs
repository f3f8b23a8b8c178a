//! The directed user–tweet bipartite graph, its neighbor samplers and the
//! per-depth frontier a mini-batch forward pass materializes.

mod frontier;
mod sampler;

pub use frontier::{build_frontier, Frontier, NodeSamples};
pub use sampler::{sample_neighbors, SampleMode};

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    User,
    Tweet,
}

impl NodeKind {
    pub fn other(self) -> Self {
        match self {
            NodeKind::User => NodeKind::Tweet,
            NodeKind::Tweet => NodeKind::User,
        }
    }

    /// Dense slot for per-kind parameter tables.
    pub fn slot(self) -> usize {
        match self {
            NodeKind::User => 0,
            NodeKind::Tweet => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeRef {
    pub kind: NodeKind,
    pub index: usize,
}

impl NodeRef {
    pub fn user(index: usize) -> Self {
        Self {
            kind: NodeKind::User,
            index,
        }
    }

    pub fn tweet(index: usize) -> Self {
        Self {
            kind: NodeKind::Tweet,
            index,
        }
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            NodeKind::User => write!(f, "u{}", self.index),
            NodeKind::Tweet => write!(f, "t{}", self.index),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Post,
    Retweet,
}

/// An undirected user–tweet relation by dense index; the graph stores both directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interaction {
    pub user: usize,
    pub tweet: usize,
    pub kind: EdgeKind,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("interaction references unknown {kind:?} `{id}`")]
    DanglingId { kind: NodeKind, id: String },
    #[error("interaction `{user}` -> `{tweet}` does not join a user and a tweet")]
    NotBipartite { user: String, tweet: String },
    #[error("tweet `{0}` has no post interaction")]
    MissingPost(String),
    #[error("tweet `{0}` has more than one post interaction")]
    DuplicatePost(String),
    #[error("node {0} is not in the graph")]
    UnknownNode(NodeRef),
    #[error("{0}")]
    InvalidArgument(String),
}

/// Compressed adjacency for one direction. Edges of each source are sorted
/// by (target, kind); `distinct` keeps each target once for sampling.
#[derive(Debug, Clone, Default, PartialEq)]
struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    kinds: Vec<EdgeKind>,
    distinct_offsets: Vec<usize>,
    distinct: Vec<usize>,
}

impl Adjacency {
    fn build(sources: usize, mut edges: Vec<(usize, usize, EdgeKind)>) -> Self {
        edges.sort_unstable();
        edges.dedup();
        let mut offsets = vec![0; sources + 1];
        for &(s, _, _) in &edges {
            offsets[s + 1] += 1;
        }
        for i in 0..sources {
            offsets[i + 1] += offsets[i];
        }
        let targets: Vec<usize> = edges.iter().map(|e| e.1).collect();
        let kinds = edges.iter().map(|e| e.2).collect();

        let mut distinct_offsets = Vec::with_capacity(sources + 1);
        let mut distinct = Vec::new();
        distinct_offsets.push(0);
        for s in 0..sources {
            let row = &targets[offsets[s]..offsets[s + 1]];
            for (i, &t) in row.iter().enumerate() {
                if i == 0 || row[i - 1] != t {
                    distinct.push(t);
                }
            }
            distinct_offsets.push(distinct.len());
        }
        Self {
            offsets,
            targets,
            kinds,
            distinct_offsets,
            distinct,
        }
    }

    fn edges(&self, s: usize) -> impl Iterator<Item = (usize, EdgeKind)> + '_ {
        let r = self.offsets[s]..self.offsets[s + 1];
        self.targets[r.clone()]
            .iter()
            .copied()
            .zip(self.kinds[r].iter().copied())
    }

    fn distinct(&self, s: usize) -> &[usize] {
        &self.distinct[self.distinct_offsets[s]..self.distinct_offsets[s + 1]]
    }
}

/// Directed bipartite graph over users and tweets. Immutable once built.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BipartiteGraph {
    user_count: usize,
    tweet_count: usize,
    user_to_tweet: Adjacency,
    tweet_to_user: Adjacency,
}

impl BipartiteGraph {
    /// Builds the graph from index-level interactions. Every tweet needs
    /// exactly one `Post` interaction; exact duplicates collapse.
    pub fn from_interactions(
        user_count: usize,
        tweet_count: usize,
        interactions: &[Interaction],
    ) -> Result<Self, GraphError> {
        Self::build_named(user_count, tweet_count, interactions, &|t| t.to_string())
    }

    fn build_named(
        user_count: usize,
        tweet_count: usize,
        interactions: &[Interaction],
        tweet_name: &dyn Fn(usize) -> String,
    ) -> Result<Self, GraphError> {
        let mut posts = vec![0usize; tweet_count];
        let mut seen = std::collections::HashSet::new();
        for it in interactions {
            if it.user >= user_count {
                return Err(GraphError::DanglingId {
                    kind: NodeKind::User,
                    id: it.user.to_string(),
                });
            }
            if it.tweet >= tweet_count {
                return Err(GraphError::DanglingId {
                    kind: NodeKind::Tweet,
                    id: it.tweet.to_string(),
                });
            }
            if it.kind == EdgeKind::Post && seen.insert(*it) {
                posts[it.tweet] += 1;
            }
        }
        for (t, &n) in posts.iter().enumerate() {
            match n {
                0 => return Err(GraphError::MissingPost(tweet_name(t))),
                1 => {}
                _ => return Err(GraphError::DuplicatePost(tweet_name(t))),
            }
        }
        let forward = interactions.iter().map(|i| (i.user, i.tweet, i.kind)).collect();
        let backward = interactions.iter().map(|i| (i.tweet, i.user, i.kind)).collect();
        Ok(Self {
            user_count,
            tweet_count,
            user_to_tweet: Adjacency::build(user_count, forward),
            tweet_to_user: Adjacency::build(tweet_count, backward),
        })
    }

    pub fn user_count(&self) -> usize {
        self.user_count
    }

    pub fn tweet_count(&self) -> usize {
        self.tweet_count
    }

    pub fn node_count(&self) -> usize {
        self.user_count + self.tweet_count
    }

    /// Number of directed edges (twice the number of distinct interactions).
    pub fn edge_count(&self) -> usize {
        self.user_to_tweet.targets.len() + self.tweet_to_user.targets.len()
    }

    pub fn count_of(&self, kind: NodeKind) -> usize {
        match kind {
            NodeKind::User => self.user_count,
            NodeKind::Tweet => self.tweet_count,
        }
    }

    pub fn contains(&self, v: NodeRef) -> bool {
        v.index < self.count_of(v.kind)
    }

    fn adjacency(&self, kind: NodeKind) -> &Adjacency {
        match kind {
            NodeKind::User => &self.user_to_tweet,
            NodeKind::Tweet => &self.tweet_to_user,
        }
    }

    fn check(&self, v: NodeRef) -> Result<(), GraphError> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(GraphError::UnknownNode(v))
        }
    }

    /// Out-neighbors with edge kinds, ordered by neighbor index then kind.
    pub fn neighbors(&self, v: NodeRef) -> Result<Vec<(NodeRef, EdgeKind)>, GraphError> {
        self.check(v)?;
        let kind = v.kind.other();
        Ok(self
            .adjacency(v.kind)
            .edges(v.index)
            .map(|(t, k)| (NodeRef { kind, index: t }, k))
            .collect())
    }

    /// Indices of distinct neighbors (of the opposite kind), ascending.
    pub fn neighbor_indices(&self, v: NodeRef) -> Result<&[usize], GraphError> {
        self.check(v)?;
        Ok(self.adjacency(v.kind).distinct(v.index))
    }

    pub fn degree(&self, v: NodeRef) -> Result<usize, GraphError> {
        self.neighbor_indices(v).map(<[usize]>::len)
    }

    /// Every stored directed edge as `(source, target, kind)`.
    pub fn directed_edges(&self) -> impl Iterator<Item = (NodeRef, NodeRef, EdgeKind)> + '_ {
        let users = (0..self.user_count).flat_map(move |u| {
            self.user_to_tweet
                .edges(u)
                .map(move |(t, k)| (NodeRef::user(u), NodeRef::tweet(t), k))
        });
        let tweets = (0..self.tweet_count).flat_map(move |t| {
            self.tweet_to_user
                .edges(t)
                .map(move |(u, k)| (NodeRef::tweet(t), NodeRef::user(u), k))
        });
        users.chain(tweets)
    }

    /// The distinct interactions the graph was built from, sorted.
    pub fn interactions(&self) -> Vec<Interaction> {
        (0..self.user_count)
            .flat_map(|u| {
                self.user_to_tweet.edges(u).map(move |(t, kind)| Interaction {
                    user: u,
                    tweet: t,
                    kind,
                })
            })
            .collect()
    }

    pub fn edge_kind_count(&self, kind: EdgeKind) -> usize {
        self.user_to_tweet.kinds.iter().filter(|k| **k == kind).count()
    }
}

/// Maps external string ids onto dense node indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeIndex {
    pub user_ids: Vec<String>,
    pub tweet_ids: Vec<String>,
    users: HashMap<String, usize>,
    tweets: HashMap<String, usize>,
}

impl NodeIndex {
    pub fn new(user_ids: Vec<String>, tweet_ids: Vec<String>) -> Self {
        let users = user_ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        let tweets = tweet_ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        Self {
            user_ids,
            tweet_ids,
            users,
            tweets,
        }
    }

    pub fn user(&self, id: &str) -> Option<NodeRef> {
        self.users.get(id).map(|&i| NodeRef::user(i))
    }

    pub fn tweet(&self, id: &str) -> Option<NodeRef> {
        self.tweets.get(id).map(|&i| NodeRef::tweet(i))
    }

    pub fn id_of(&self, v: NodeRef) -> &str {
        match v.kind {
            NodeKind::User => &self.user_ids[v.index],
            NodeKind::Tweet => &self.tweet_ids[v.index],
        }
    }
}

/// Builds the graph from string ids. Users and tweets index in the order given.
pub fn build_graph(
    users: &[String],
    tweets: &[String],
    interactions: &[(String, String, EdgeKind)],
) -> Result<(BipartiteGraph, NodeIndex), GraphError> {
    let index = NodeIndex::new(users.to_vec(), tweets.to_vec());
    let mut resolved = Vec::with_capacity(interactions.len());
    for (user, tweet, kind) in interactions {
        let u = match index.user(user) {
            Some(u) => u.index,
            None if index.tweet(user).is_some() => {
                return Err(GraphError::NotBipartite {
                    user: user.clone(),
                    tweet: tweet.clone(),
                })
            }
            None => {
                return Err(GraphError::DanglingId {
                    kind: NodeKind::User,
                    id: user.clone(),
                })
            }
        };
        let t = match index.tweet(tweet) {
            Some(t) => t.index,
            None if index.user(tweet).is_some() => {
                return Err(GraphError::NotBipartite {
                    user: user.clone(),
                    tweet: tweet.clone(),
                })
            }
            None => {
                return Err(GraphError::DanglingId {
                    kind: NodeKind::Tweet,
                    id: tweet.clone(),
                })
            }
        };
        resolved.push(Interaction {
            user: u,
            tweet: t,
            kind: *kind,
        });
    }
    let graph = BipartiteGraph::build_named(users.len(), tweets.len(), &resolved, &|t| index.tweet_ids[t].clone())?;
    Ok((graph, index))
}
