use indexmap::{IndexMap, IndexSet};
use rand::Rng;

use super::{sample_neighbors, BipartiteGraph, GraphError, NodeRef, SampleMode};

/// Sampled neighborhoods of one center node at one depth.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NodeSamples {
    /// One-hop multiset drawn by the first sampler.
    pub one_hop: Vec<NodeRef>,
    /// For each entry of `one_hop`, the second sampler's draw from that neighbor.
    pub two_hop: Vec<Vec<NodeRef>>,
}

/// Nested node sets `B^0 ⊇ B^1 ⊇ … ⊇ B^K = batch` with the draws that
/// produced them, so the forward pass reuses exactly these samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Frontier {
    pub depth: usize,
    pub one_hop_size: usize,
    pub two_hop_size: usize,
    pub mode: SampleMode,
    layers: Vec<Vec<NodeRef>>,
    samples: Vec<IndexMap<NodeRef, NodeSamples>>,
}

impl Frontier {
    /// Nodes of `B^k` in insertion order: `B^{k+1}` first, then newly reached nodes.
    pub fn layer(&self, k: usize) -> &[NodeRef] {
        &self.layers[k]
    }

    pub fn batch(&self) -> &[NodeRef] {
        &self.layers[self.depth]
    }

    /// Samples taken for `node` while updating it at depth `k` (1-based).
    pub fn samples(&self, k: usize, node: NodeRef) -> Option<&NodeSamples> {
        self.samples.get(k.checked_sub(1)?)?.get(&node)
    }
}

/// Expands `batch` outward `depth` times, sampling one-hop neighbors of each
/// node and two-hop neighbors through each sampled one-hop neighbor.
pub fn build_frontier<R: Rng + ?Sized>(
    graph: &BipartiteGraph,
    batch: &[NodeRef],
    depth: usize,
    one_hop_size: usize,
    two_hop_size: usize,
    mode: SampleMode,
    rng: &mut R,
) -> Result<Frontier, GraphError> {
    if batch.is_empty() {
        return Err(GraphError::InvalidArgument("frontier needs a nonempty batch".into()));
    }
    if depth == 0 {
        return Err(GraphError::InvalidArgument("frontier depth must be at least 1".into()));
    }
    if let Some(v) = batch.iter().find(|v| !graph.contains(**v)) {
        return Err(GraphError::UnknownNode(*v));
    }

    let top: IndexSet<NodeRef> = batch.iter().copied().collect();
    let mut layers = vec![Vec::new(); depth + 1];
    let mut samples = vec![IndexMap::new(); depth];
    layers[depth] = top.into_iter().collect();

    for k in (1..=depth).rev() {
        let mut next: IndexSet<NodeRef> = layers[k].iter().copied().collect();
        let mut per_node = IndexMap::with_capacity(layers[k].len());
        for &u in &layers[k] {
            let one_hop = sample_neighbors(graph, u, one_hop_size, mode, rng)?;
            let mut two_hop = Vec::with_capacity(one_hop.len());
            for &v in &one_hop {
                next.insert(v);
                let draw = sample_neighbors(graph, v, two_hop_size, mode, rng)?;
                next.extend(draw.iter().copied());
                two_hop.push(draw);
            }
            per_node.insert(u, NodeSamples { one_hop, two_hop });
        }
        samples[k - 1] = per_node;
        layers[k - 1] = next.into_iter().collect();
    }

    Ok(Frontier {
        depth,
        one_hop_size,
        two_hop_size,
        mode,
        layers,
        samples,
    })
}
