use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::train::Scorer;
use crate::autograd::{ParamStore, Tape, Var};
use crate::error::Result;
use crate::layers::{BatchStats, Dense, Embedding};
use crate::model::{Batch, VocabSizes};

/// Candidate embedding next to the mean of the history embeddings, scored by
/// a one-hidden-layer network. Used only as a reference point.
#[derive(Debug, Clone)]
pub struct MeanPoolBaseline {
    pub store: ParamStore,
    pub item_emb: Embedding,
    pub hidden: Dense,
    pub output: Dense,
}

impl MeanPoolBaseline {
    pub fn new(sizes: VocabSizes, dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let item_emb = Embedding::new(&mut store, "item_emb", sizes.items, dim, &mut rng);
        let hidden_layer = Dense::new(&mut store, "hidden", 2 * dim, hidden, true, &mut rng);
        let output = Dense::new(&mut store, "out", hidden, 1, true, &mut rng);
        Self {
            store,
            item_emb,
            hidden: hidden_layer,
            output,
        }
    }
}

impl Scorer for MeanPoolBaseline {
    fn params(&self) -> &ParamStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn score(&self, tape: &mut Tape, batch: &Batch, _training: bool) -> Result<(Var, Option<BatchStats>)> {
        let g = &batch.graphs;
        let cand = self.item_emb.lookup(tape, &self.store, &batch.candidate_items)?;
        let nodes = self.item_emb.lookup(tape, &self.store, &g.node_item)?;
        let inv: Vec<f64> = g.graph_of.iter().map(|&k| 1.0 / g.graph_len(k) as f64).collect();
        let inv = tape.constant(inv.len(), 1, inv)?;
        let scaled = tape.mul_col(nodes, inv)?;
        let mean = tape.segment_sum(scaled, &g.graph_of, g.n_graphs)?;
        let x = tape.concat_cols(&[cand, mean])?;
        let h = self.hidden.forward(tape, &self.store, x)?;
        let h = tape.relu(h);
        let logit = self.output.forward(tape, &self.store, h)?;
        Ok((tape.sigmoid(logit), None))
    }

    fn commit_batch_stats(&mut self, _stats: &BatchStats) {}
}
