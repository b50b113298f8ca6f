use crate::dataset::{DomainId, Vocab, WindowedSample};
use crate::error::Result;
use crate::graph::{Representation, UserHistoryGraph};
use crate::layers::EdgeIndex;

/// One sample with its graph, in vocabulary index space.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSample {
    pub node_item: Vec<usize>,
    pub node_domain: Vec<usize>,
    /// Local `(src, trg)` node indices.
    pub edges: Vec<(usize, usize)>,
    pub last_node: usize,
    pub user: usize,
    pub candidate_item: usize,
    pub candidate_domain: usize,
    pub label: f64,
    /// Raw candidate domain, for per-domain metrics.
    pub domain: DomainId,
}

impl EncodedSample {
    pub fn new(sample: &WindowedSample, graph: &UserHistoryGraph, vocab: &Vocab) -> Self {
        Self {
            node_item: graph.nodes.iter().map(|n| vocab.item(n.item)).collect(),
            node_domain: graph.nodes.iter().map(|n| vocab.domain(n.domain)).collect(),
            edges: graph.edges.iter().map(|e| (e.src, e.trg)).collect(),
            last_node: graph.last_node,
            user: vocab.user(sample.user),
            candidate_item: vocab.item(sample.candidate_item),
            candidate_domain: vocab.domain(sample.candidate_domain),
            label: f64::from(sample.label),
            domain: sample.candidate_domain,
        }
    }
}

/// Builds graphs for every sample. Samples whose graph cannot be built
/// (Disjoint with no candidate-domain history) are dropped and counted.
pub fn encode_samples(
    samples: &[WindowedSample],
    repr: Representation,
    vocab: &Vocab,
) -> Result<(Vec<EncodedSample>, usize)> {
    let mut out = Vec::with_capacity(samples.len());
    let mut dropped = 0;
    for s in samples {
        match repr.build(s) {
            Ok(g) => out.push(EncodedSample::new(s, &g, vocab)),
            Err(crate::Error::Data(_)) => dropped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((out, dropped))
}

/// Disjoint union of the graphs of a mini-batch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GraphBatch {
    pub n_graphs: usize,
    pub node_item: Vec<usize>,
    pub node_domain: Vec<usize>,
    /// Graph index of each node.
    pub graph_of: Vec<usize>,
    /// Start offset of each graph's nodes.
    pub offsets: Vec<usize>,
    pub edges: EdgeIndex,
    pub edge_src_domain: Vec<usize>,
    pub edge_trg_domain: Vec<usize>,
    /// Global index of each graph's last node.
    pub last_node: Vec<usize>,
}

impl GraphBatch {
    pub fn n_nodes(&self) -> usize {
        self.node_item.len()
    }

    pub fn graph_len(&self, g: usize) -> usize {
        let end = self.offsets.get(g + 1).copied().unwrap_or(self.n_nodes());
        end - self.offsets[g]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub graphs: GraphBatch,
    pub users: Vec<usize>,
    pub candidate_items: Vec<usize>,
    pub candidate_domains: Vec<usize>,
    pub labels: Vec<f64>,
    pub domains: Vec<DomainId>,
}

impl Batch {
    pub fn collate<'a>(samples: impl IntoIterator<Item = &'a EncodedSample>) -> Self {
        let mut b = Batch::default();
        let mut src = Vec::new();
        let mut trg = Vec::new();
        for (g, s) in samples.into_iter().enumerate() {
            let off = b.graphs.node_item.len();
            b.graphs.offsets.push(off);
            b.graphs.node_item.extend_from_slice(&s.node_item);
            b.graphs.node_domain.extend_from_slice(&s.node_domain);
            b.graphs.graph_of.extend(std::iter::repeat_n(g, s.node_item.len()));
            for &(a, z) in &s.edges {
                src.push(off + a);
                trg.push(off + z);
                b.graphs.edge_src_domain.push(s.node_domain[a]);
                b.graphs.edge_trg_domain.push(s.node_domain[z]);
            }
            b.graphs.last_node.push(off + s.last_node);
            b.users.push(s.user);
            b.candidate_items.push(s.candidate_item);
            b.candidate_domains.push(s.candidate_domain);
            b.labels.push(s.label);
            b.domains.push(s.domain);
            b.graphs.n_graphs += 1;
        }
        b.graphs.edges = EdgeIndex::new(src, trg);
        b
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_interacting;

    #[test]
    fn collate_offsets_nodes_and_edges() {
        let s = WindowedSample {
            user: 5,
            history: vec![(10, 0), (11, 1), (12, 0)],
            candidate_item: 13,
            candidate_domain: 1,
            label: 1,
            timestamp: 0,
        };
        let vocab = Vocab::new(vec![10, 11, 12, 13], vec![5], vec![0, 1]);
        let e = EncodedSample::new(&s, &build_interacting(&s).unwrap(), &vocab);
        assert_eq!(e.node_item, [1, 2, 3]);
        assert_eq!(e.node_domain, [1, 2, 1]);
        let b = Batch::collate([&e, &e]);
        assert_eq!(b.graphs.n_nodes(), 6);
        assert_eq!(b.graphs.graph_of, [0, 0, 0, 1, 1, 1]);
        assert_eq!(b.graphs.last_node, [2, 5]);
        assert_eq!(b.graphs.edges.len(), 6);
        assert_eq!(b.graphs.edges.src[3..], [3, 4, 3]);
        assert_eq!(b.graphs.edges.trg[3..], [4, 5, 5]);
        assert_eq!(b.graphs.edge_src_domain[2], 1);
        assert_eq!(b.graphs.graph_len(1), 3);
        assert_eq!(b.candidate_items, [4, 4]);
    }
}
