use rand::Rng;

use super::normal_init;
use crate::autograd::{ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};

/// Lookup table; index 0 is reserved for padding/unknown ids.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub table: ParamId,
    pub vocab_size: usize,
    pub dim: usize,
}

pub const EMBEDDING_STD: f64 = 0.01;

impl Embedding {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        vocab_size: usize,
        dim: usize,
        rng: &mut R,
    ) -> Self {
        let table = store.add_embedding(name, normal_init(rng, vocab_size, dim, EMBEDDING_STD));
        Self {
            table,
            vocab_size,
            dim,
        }
    }

    pub fn lookup(&self, tape: &mut Tape, store: &ParamStore, index: &[usize]) -> Result<Var> {
        if let Some(&bad) = index.iter().find(|&&i| i >= self.vocab_size) {
            return Err(Error::Index {
                what: "embedding",
                index: bad,
                bound: self.vocab_size,
            });
        }
        let t = tape.param(store, self.table)?;
        tape.gather(t, index)
    }
}
