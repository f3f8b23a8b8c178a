use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BipartiteGraph, GraphError, NodeRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SampleMode {
    /// `size` independent uniform draws with replacement.
    #[default]
    Replacement,
    /// Every distinct neighbor exactly once, ignoring `size`.
    Exhaustive,
}

/// Draws a neighbor multiset of `v`. A node without neighbors yields an
/// empty multiset in either mode; exhaustive mode consumes no randomness.
pub fn sample_neighbors<R: Rng + ?Sized>(
    graph: &BipartiteGraph,
    v: NodeRef,
    size: usize,
    mode: SampleMode,
    rng: &mut R,
) -> Result<Vec<NodeRef>, GraphError> {
    if size == 0 {
        return Err(GraphError::InvalidArgument("sample size must be at least 1".into()));
    }
    let pool = graph.neighbor_indices(v)?;
    let kind = v.kind.other();
    let at = |index: usize| NodeRef { kind, index };
    Ok(match mode {
        SampleMode::Exhaustive => pool.iter().map(|&i| at(i)).collect(),
        SampleMode::Replacement if pool.is_empty() => Vec::new(),
        SampleMode::Replacement => (0..size).map(|_| at(pool[rng.random_range(0..pool.len())])).collect(),
    })
}
