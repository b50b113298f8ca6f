use rand::Rng;

use super::{uniform_fan_in, zeros_trainable, EdgeIndex};
use crate::autograd::{ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};

/// Gated graph convolution: edge-weighted message aggregation feeding a GRU
/// cell whose hidden state is the node state.
///
/// For node `j` with incoming edges `z → j` of weight `e_zj`:
///
/// ```text
/// m_j = Σ e_zj · (h_z W_msg)
/// r   = σ(m W_ir + h W_hr + b_r)
/// u   = σ(m W_iu + h W_hu + b_u)
/// c   = tanh(m W_ic + r ⊙ (h W_hc) + b_c)
/// h'  = (1 - u) ⊙ c + u ⊙ h
/// ```
///
/// The three input and hidden projections are stored side by side as
/// `d × 3d` matrices.
#[derive(Debug, Clone)]
pub struct GgcnLayer {
    pub dim: usize,
    pub w_msg: ParamId,
    pub w_input: ParamId,
    pub w_hidden: ParamId,
    pub bias: ParamId,
}

impl GgcnLayer {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, dim: usize, rng: &mut R) -> Self {
        Self {
            dim,
            w_msg: store.add(format!("{name}.w_msg"), uniform_fan_in(rng, dim, dim, dim)),
            w_input: store.add(
                format!("{name}.w_input"),
                uniform_fan_in(rng, dim, 3 * dim, dim),
            ),
            w_hidden: store.add(
                format!("{name}.w_hidden"),
                uniform_fan_in(rng, dim, 3 * dim, dim),
            ),
            bias: store.add(format!("{name}.bias"), zeros_trainable(3 * dim)),
        }
    }

    /// `states` is `n × dim`, `edge_weights` is `E × 1`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        states: Var,
        edges: &EdgeIndex,
        edge_weights: Var,
    ) -> Result<Var> {
        let (n, d) = tape.shape(states);
        if d != self.dim {
            return Err(Error::dims("ggcn states", &[n, d], &[self.dim]));
        }
        if tape.shape(edge_weights) != (edges.len(), 1) {
            let (r, c) = tape.shape(edge_weights);
            return Err(Error::dims("ggcn edge weights", &[r, c], &[edges.len(), 1]));
        }
        let w_msg = tape.param(store, self.w_msg)?;
        let projected = tape.matmul(states, w_msg)?;
        let from_src = tape.gather(projected, &edges.src)?;
        let weighted = tape.mul_col(from_src, edge_weights)?;
        let message = tape.segment_sum(weighted, &edges.trg, n)?;

        let w_in = tape.param(store, self.w_input)?;
        let w_hid = tape.param(store, self.w_hidden)?;
        let bias = tape.param(store, self.bias)?;
        let gi = tape.matmul(message, w_in)?;
        let gi = tape.add(gi, bias)?;
        let gh = tape.matmul(states, w_hid)?;

        let (i_r, i_u, i_c) = split3(tape, gi, d)?;
        let (h_r, h_u, h_c) = split3(tape, gh, d)?;
        let r = tape.add(i_r, h_r)?;
        let r = tape.sigmoid(r);
        let u = tape.add(i_u, h_u)?;
        let u = tape.sigmoid(u);
        let gated = tape.mul(r, h_c)?;
        let c = tape.add(i_c, gated)?;
        let c = tape.tanh(c);

        let keep = tape.affine(u, -1.0, 1.0);
        let a = tape.mul(keep, c)?;
        let b = tape.mul(u, states)?;
        tape.add(a, b)
    }
}

fn split3(tape: &mut Tape, x: Var, d: usize) -> Result<(Var, Var, Var)> {
    Ok((
        tape.slice_cols(x, 0, d)?,
        tape.slice_cols(x, d, d)?,
        tape.slice_cols(x, 2 * d, d)?,
    ))
}
