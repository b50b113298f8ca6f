//! Similarity-based graph structure learning.
//!
//! The learned adjacency is binary, so it is computed from forward values
//! outside the tape and enters the network only as an edge list.

use crate::layers::EdgeIndex;

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

/// Row-vector projection `x · W` for `x` of length `d` and `W` stored `d × k`.
fn project(x: &[f64], w: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; k];
    for (i, &xi) in x.iter().enumerate() {
        for (o, &wij) in out.iter_mut().zip(&w[i * k..(i + 1) * k]) {
            *o += xi * wij;
        }
    }
    out
}

/// Head-averaged cosine similarity matrix (`n × n`, row-major) of the rows of
/// `feats` (`n × d`) under each head projection (`d × k`).
pub fn similarity(feats: &[f64], n: usize, d: usize, heads: &[&[f64]], k: usize) -> Vec<f64> {
    let mut mean = vec![0.0; n * n];
    for w in heads {
        let proj: Vec<Vec<f64>> = (0..n).map(|i| project(&feats[i * d..(i + 1) * d], w, k)).collect();
        for j in 0..n {
            for z in 0..n {
                mean[j * n + z] += cosine(&proj[j], &proj[z]) / heads.len() as f64;
            }
        }
    }
    mean
}

/// `A′[j, z] = 1` iff the mean similarity is at least `threshold`; the
/// diagonal is always set.
pub fn threshold_adjacency(scores: &[f64], n: usize, threshold: f64) -> Vec<bool> {
    (0..n * n)
        .map(|idx| idx / n == idx % n || scores[idx] >= threshold)
        .collect()
}

/// Learned adjacency of one graph.
pub fn graph_structure_learn(
    feats: &[f64],
    n: usize,
    d: usize,
    heads: &[&[f64]],
    k: usize,
    threshold: f64,
) -> Vec<bool> {
    threshold_adjacency(&similarity(feats, n, d, heads, k), n, threshold)
}

/// Learned edges for a batch of graphs whose nodes occupy consecutive ranges
/// starting at `offsets`. Edges are grouped by target node.
pub fn batch_edges(
    feats: &[f64],
    d: usize,
    offsets: &[usize],
    n_nodes: usize,
    heads: &[&[f64]],
    k: usize,
    threshold: f64,
) -> EdgeIndex {
    let mut src = Vec::new();
    let mut trg = Vec::new();
    for (g, &off) in offsets.iter().enumerate() {
        let end = offsets.get(g + 1).copied().unwrap_or(n_nodes);
        let n = end - off;
        let adj = graph_structure_learn(&feats[off * d..end * d], n, d, heads, k, threshold);
        for z in 0..n {
            for j in 0..n {
                if adj[z * n + j] {
                    src.push(off + j);
                    trg.push(off + z);
                }
            }
        }
    }
    EdgeIndex::new(src, trg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const IDENT: [f64; 4] = [1.0, 0.0, 0.0, 1.0];

    #[test]
    fn identical_items_are_connected() {
        let feats = [0.3, -0.7, 0.3, -0.7];
        let adj = graph_structure_learn(&feats, 2, 2, &[&IDENT, &IDENT], 2, 0.5);
        assert!(adj.iter().all(|&a| a));
    }

    #[test]
    fn orthogonal_items_are_not() {
        let feats = [1.0, 0.0, 0.0, 2.0];
        let s = similarity(&feats, 2, 2, &[&IDENT], 2);
        assert_eq!(s[1], 0.0);
        let adj = threshold_adjacency(&s, 2, 0.5);
        assert_eq!(adj, [true, false, false, true]);
    }

    #[test]
    fn mean_over_heads_is_thresholded() {
        // per-head 0.9 and 0.2 average to 0.55
        let scores = [1.0, (0.9 + 0.2) / 2.0, (0.9 + 0.2) / 2.0, 1.0];
        assert!(threshold_adjacency(&scores, 2, 0.5)[1]);
    }

    #[test]
    fn zero_vectors_have_zero_similarity() {
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 2.0]), 0.0);
        let adj = graph_structure_learn(&[0.0, 0.0, 0.0, 0.0], 2, 2, &[&IDENT], 2, 0.5);
        assert_eq!(adj, [true, false, false, true]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn adjacency_is_symmetric_with_unit_diagonal(
            n in 1usize..9,
            vals in prop::collection::vec(-1.0f64..1.0, 8 * 3 + 2 * 3 * 2),
        ) {
            let feats = &vals[..n * 3];
            let (w1, w2) = vals[24..].split_at(6);
            let adj = graph_structure_learn(feats, n, 3, &[w1, w2], 2, 0.5);
            for j in 0..n {
                prop_assert!(adj[j * n + j]);
                for z in 0..n {
                    prop_assert_eq!(adj[j * n + z], adj[z * n + j]);
                }
            }
        }
    }
}
