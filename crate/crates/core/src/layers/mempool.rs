use rand::Rng;

use super::uniform_fan_in;
use crate::autograd::{ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};

/// One memory-pooling level: soft-assigns nodes to learnable centroids and
/// pools each graph into `n_centroids` rows.
///
/// Per key head `h`, `C^h[i, j] ∝ (1 + ‖x_i − k^h_j‖²)^{-1}` normalized over
/// `j`; heads are averaged and renormalized, then the pooled features are
/// `relu((Cᵀ X) W_out)` per graph.
#[derive(Debug, Clone)]
pub struct MemPoolLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub n_centroids: usize,
    pub keys: Vec<ParamId>,
    pub w_out: ParamId,
}

pub struct MemPoolOutput {
    /// `(n_graphs · n_centroids) × out_dim`, graph-major.
    pub pooled: Var,
    /// `n_nodes × n_centroids`, row-stochastic.
    pub assignment: Var,
}

impl MemPoolLayer {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        n_centroids: usize,
        key_heads: usize,
        rng: &mut R,
    ) -> Self {
        let keys = (0..key_heads)
            .map(|h| {
                store.add(
                    format!("{name}.keys{h}"),
                    uniform_fan_in(rng, n_centroids, in_dim, in_dim),
                )
            })
            .collect();
        let w_out = store.add(
            format!("{name}.w_out"),
            uniform_fan_in(rng, in_dim, out_dim, in_dim),
        );
        Self {
            in_dim,
            out_dim,
            n_centroids,
            keys,
            w_out,
        }
    }

    /// `graph_of` maps each row of `x` to its graph in `0..n_graphs`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: Var,
        graph_of: &[usize],
        n_graphs: usize,
    ) -> Result<MemPoolOutput> {
        let (n, d) = tape.shape(x);
        if d != self.in_dim {
            return Err(Error::dims("mempool input", &[n, d], &[self.in_dim]));
        }
        if n == 0 {
            return Err(Error::contract("memory pooling over zero nodes"));
        }
        let mut mean: Option<Var> = None;
        for &k in &self.keys {
            let keys = tape.param(store, k)?;
            let dist = tape.sq_dist(x, keys)?;
            let kernel = tape.affine(dist, 1.0, 1.0);
            let kernel = tape.powf(kernel, -1.0);
            let c = tape.normalize_rows(kernel)?;
            mean = Some(match mean {
                None => c,
                Some(acc) => tape.add(acc, c)?,
            });
        }
        let summed = mean.ok_or_else(|| Error::contract("memory pooling needs a key head"))?;
        let avg = tape.scale(summed, 1.0 / self.keys.len() as f64);
        let assignment = tape.normalize_rows(avg)?;
        let pooled = tape.segment_pool(assignment, x, graph_of, n_graphs)?;
        let w = tape.param(store, self.w_out)?;
        let out = tape.matmul(pooled, w)?;
        Ok(MemPoolOutput {
            pooled: tape.relu(out),
            assignment,
        })
    }
}
