use rand::Rng;

use super::{uniform_fan_in, EdgeIndex};
use crate::autograd::{ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};

/// Multi-head graph attention with concatenated heads.
///
/// Per head, `score(z → j) = leaky_relu(a_srcᵀ W x_z + a_dstᵀ W x_j)`, which is
/// the split form of `aᵀ [W x_z ∥ W x_j]`. Scores are normalized over each
/// node's incoming edges.
#[derive(Debug, Clone)]
pub struct GatLayer {
    pub in_dim: usize,
    pub head_dim: usize,
    pub heads: Vec<GatHead>,
    pub negative_slope: f64,
}

#[derive(Debug, Clone)]
pub struct GatHead {
    pub proj: ParamId,
    pub att_src: ParamId,
    pub att_dst: ParamId,
}

impl GatLayer {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        head_dim: usize,
        n_heads: usize,
        rng: &mut R,
    ) -> Self {
        let heads = (0..n_heads)
            .map(|h| GatHead {
                proj: store.add(
                    format!("{name}.head{h}.proj"),
                    uniform_fan_in(rng, in_dim, head_dim, in_dim),
                ),
                att_src: store.add(
                    format!("{name}.head{h}.att_src"),
                    uniform_fan_in(rng, head_dim, 1, 2 * head_dim),
                ),
                att_dst: store.add(
                    format!("{name}.head{h}.att_dst"),
                    uniform_fan_in(rng, head_dim, 1, 2 * head_dim),
                ),
            })
            .collect();
        Self {
            in_dim,
            head_dim,
            heads,
            negative_slope: 0.2,
        }
    }

    pub fn out_dim(&self) -> usize {
        self.head_dim * self.heads.len()
    }

    /// Every node must have at least one incoming edge (callers add self-loops).
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: Var,
        edges: &EdgeIndex,
    ) -> Result<Var> {
        let (n, d) = tape.shape(x);
        if d != self.in_dim {
            return Err(Error::dims("gat input", &[n, d], &[self.in_dim]));
        }
        if n == 0 {
            return Err(Error::contract("graph attention over an empty graph"));
        }
        let mut has_in = vec![false; n];
        for &t in &edges.trg {
            if t >= n {
                return Err(Error::Index {
                    what: "gat edge target",
                    index: t,
                    bound: n,
                });
            }
            has_in[t] = true;
        }
        if let Some(j) = has_in.iter().position(|&h| !h) {
            return Err(Error::contract(format!(
                "node {j} has no incoming edge; attention is undefined"
            )));
        }

        let mut outs = Vec::with_capacity(self.heads.len());
        for head in &self.heads {
            let w = tape.param(store, head.proj)?;
            let wx = tape.matmul(x, w)?;
            let a_src = tape.param(store, head.att_src)?;
            let a_dst = tape.param(store, head.att_dst)?;
            let s_src = tape.matmul(wx, a_src)?;
            let s_dst = tape.matmul(wx, a_dst)?;
            let e_src = tape.gather(s_src, &edges.src)?;
            let e_dst = tape.gather(s_dst, &edges.trg)?;
            let score = tape.add(e_src, e_dst)?;
            let score = tape.leaky_relu(score, self.negative_slope);
            let alpha = tape.segment_softmax(score, &edges.trg, n)?;
            let msg = tape.gather(wx, &edges.src)?;
            let msg = tape.mul_col(msg, alpha)?;
            outs.push(tape.segment_sum(msg, &edges.trg, n)?);
        }
        tape.concat_cols(&outs)
    }
}
