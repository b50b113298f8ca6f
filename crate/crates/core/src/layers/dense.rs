use rand::Rng;

use super::{uniform_fan_in, zeros_trainable};
use crate::autograd::{ParamId, ParamStore, Tape, Var};
use crate::error::Result;

/// `x · W (+ b)` with `W` stored as `in × out`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Dense {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        bias: bool,
        rng: &mut R,
    ) -> Self {
        let weight = store.add(
            format!("{name}.weight"),
            uniform_fan_in(rng, in_dim, out_dim, in_dim),
        );
        let bias = bias.then(|| store.add(format!("{name}.bias"), zeros_trainable(out_dim)));
        Self {
            weight,
            bias,
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.weight)?;
        let y = tape.matmul(x, w)?;
        match self.bias {
            Some(b) => {
                let b = tape.param(store, b)?;
                tape.add(y, b)
            }
            None => Ok(y),
        }
    }
}
