//! User-history graphs in the three input representations.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::dataset::{DomainId, ItemId, WindowedSample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Node {
    /// Position in the windowed history (0-based).
    pub position: usize,
    pub item: ItemId,
    pub domain: DomainId,
}

/// Directed edge between node indices, carrying its endpoint domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub src: usize,
    pub trg: usize,
    pub src_domain: DomainId,
    pub trg_domain: DomainId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserHistoryGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    /// Index into `nodes` of the most recent interaction.
    pub last_node: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Representation {
    Disjoint,
    Flattened,
    Interacting,
}

impl Representation {
    pub const ALL: [Representation; 3] = [Self::Disjoint, Self::Flattened, Self::Interacting];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Disjoint => "disjoint",
            Self::Flattened => "flattened",
            Self::Interacting => "interacting",
        }
    }

    pub fn build(self, sample: &WindowedSample) -> Result<UserHistoryGraph> {
        match self {
            Self::Disjoint => build_disjoint(sample),
            Self::Flattened => build_flattened(sample),
            Self::Interacting => build_interacting(sample),
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "disjoint" => Ok(Self::Disjoint),
            "flattened" => Ok(Self::Flattened),
            "interacting" => Ok(Self::Interacting),
            other => Err(Error::Config(format!(
                "unknown representation `{other}` (expected disjoint, flattened or interacting)"
            ))),
        }
    }
}

impl UserHistoryGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn path(nodes: Vec<Node>) -> Self {
        let edges = nodes
            .windows(2)
            .enumerate()
            .map(|(k, w)| Edge {
                src: k,
                trg: k + 1,
                src_domain: w[0].domain,
                trg_domain: w[1].domain,
            })
            .collect();
        let last_node = nodes.len() - 1;
        Self { nodes, edges, last_node }
    }

    /// Node table then edge list: `pos,item,domain` rows and
    /// `src_pos,trg_pos,src_dom,trg_dom` rows, each under its own header.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "pos,item,domain")?;
        for n in &self.nodes {
            writeln!(w, "{},{},{}", n.position, n.item, n.domain)?;
        }
        writeln!(w, "src_pos,trg_pos,src_dom,trg_dom")?;
        for e in &self.edges {
            writeln!(
                w,
                "{},{},{},{}",
                self.nodes[e.src].position, self.nodes[e.trg].position, e.src_domain, e.trg_domain
            )?;
        }
        Ok(())
    }
}

fn history_nodes(sample: &WindowedSample) -> Result<Vec<Node>> {
    if sample.history.is_empty() {
        return Err(Error::contract("cannot build a graph from an empty history"));
    }
    Ok(sample
        .history
        .iter()
        .enumerate()
        .map(|(position, &(item, domain))| Node { position, item, domain })
        .collect())
}

/// Single timeline over all domains: one edge per consecutive pair.
pub fn build_flattened(sample: &WindowedSample) -> Result<UserHistoryGraph> {
    Ok(UserHistoryGraph::path(history_nodes(sample)?))
}

/// Flattened path plus an edge between consecutive occurrences of each domain
/// that are not already adjacent.
pub fn build_interacting(sample: &WindowedSample) -> Result<UserHistoryGraph> {
    let mut g = build_flattened(sample)?;
    let mut last_seen: Vec<(DomainId, usize)> = Vec::new();
    for (k, node) in g.nodes.iter().enumerate() {
        match last_seen.iter_mut().find(|(d, _)| *d == node.domain) {
            Some(slot) => {
                if slot.1 + 1 < k {
                    g.edges.push(Edge {
                        src: slot.1,
                        trg: k,
                        src_domain: node.domain,
                        trg_domain: node.domain,
                    });
                }
                slot.1 = k;
            }
            None => last_seen.push((node.domain, k)),
        }
    }
    Ok(g)
}

/// Path over the history positions in the candidate's domain only.
pub fn build_disjoint(sample: &WindowedSample) -> Result<UserHistoryGraph> {
    let nodes: Vec<Node> = history_nodes(sample)?
        .into_iter()
        .filter(|n| n.domain == sample.candidate_domain)
        .collect();
    if nodes.is_empty() {
        return Err(Error::Data(format!(
            "no history in candidate domain {} for user {}",
            sample.candidate_domain, sample.user
        )));
    }
    Ok(UserHistoryGraph::path(nodes))
}
