//! The MAGRec network.
//!
//! Per sample, history nodes get (optionally domain-contextualized) item
//! features. The recent-interest branch runs gated graph convolutions with
//! domain-pair edge weights and an attention readout anchored on the last
//! node; the global-interest branch learns a similarity graph, applies graph
//! attention and hierarchical memory pooling, and mixes in the user
//! embedding. A batch-normalized tower scores the concatenation of the
//! candidate item and both interest vectors.

mod batch;
mod checkpoint;
mod config;
pub mod gsl;

pub use batch::{encode_samples, Batch, EncodedSample, GraphBatch};
pub use checkpoint::{read_tensors, write_tensors, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::MagrecConfig;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::{ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::layers::{
    uniform_fan_in, BatchNorm, BatchStats, Dense, EdgeIndex, Embedding, GatLayer, GgcnLayer,
    MemPoolLayer,
};

/// Embedding table sizes, each including the reserved row 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VocabSizes {
    pub items: usize,
    pub users: usize,
    pub domains: usize,
}

#[derive(Debug, Clone)]
pub struct MagrecModel {
    pub config: MagrecConfig,
    pub sizes: VocabSizes,
    pub store: ParamStore,
    pub item_emb: Embedding,
    pub user_emb: Embedding,
    pub domain_emb: Embedding,
    pub w_d: Dense,
    pub w_src: ParamId,
    pub w_trg: ParamId,
    pub ggcn: Vec<GgcnLayer>,
    pub w_l1: Dense,
    pub w_l2: Dense,
    /// Per-head projections for structure learning. They only feed a
    /// thresholded adjacency and are therefore frozen.
    pub w_gsl: Vec<ParamId>,
    pub gat: Vec<GatLayer>,
    pub mempool: Vec<MemPoolLayer>,
    pub w_u: Dense,
    pub bn: BatchNorm,
    pub tower: Vec<Dense>,
    pub output: Dense,
}

/// Values recorded by one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// `B × 1` click probabilities.
    pub prediction: Var,
    pub candidate: Var,
    pub recent: Var,
    pub global: Var,
    /// `N × 1` readout coefficients when the recent branch is active.
    pub readout: Option<Var>,
    pub bn_stats: Option<BatchStats>,
}

impl MagrecModel {
    pub fn new(config: MagrecConfig, sizes: VocabSizes, seed: u64) -> Result<Self> {
        config.validate()?;
        if sizes.items == 0 || sizes.users == 0 || sizes.domains == 0 {
            return Err(Error::Config("vocabulary sizes must be positive".into()));
        }
        let c = &config;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let r = &mut rng;
        let s = &mut store;

        let item_emb = Embedding::new(s, "item_emb", sizes.items, c.item_dim, r);
        let user_emb = Embedding::new(s, "user_emb", sizes.users, c.user_dim, r);
        let domain_emb = Embedding::new(s, "domain_emb", sizes.domains, c.domain_dim, r);
        let w_d = Dense::new(s, "dc.w_d", c.item_dim + c.domain_dim, c.item_dim, false, r);
        let w_src = s.add("edge.w_src", uniform_fan_in(r, c.domain_dim, c.edge_dim, c.domain_dim));
        let w_trg = s.add("edge.w_trg", uniform_fan_in(r, c.domain_dim, c.edge_dim, c.domain_dim));
        let ggcn = (0..c.ggcn_layers)
            .map(|l| GgcnLayer::new(s, &format!("ggcn{l}"), c.item_dim, r))
            .collect();
        let w_l1 = Dense::new(s, "readout.w_l1", 2 * c.item_dim, c.item_dim, false, r);
        let w_l2 = Dense::new(s, "readout.w_l2", c.item_dim, 1, false, r);
        let w_gsl = (0..c.gsl_heads)
            .map(|h| {
                let w = uniform_fan_in(r, c.item_dim, c.item_dim, c.item_dim).with_requires_grad(false);
                s.add(format!("gsl.head{h}"), w)
            })
            .collect();
        let mut gat = Vec::with_capacity(c.gat_layers);
        let mut width = c.item_dim;
        for k in 0..c.gat_layers {
            let layer = GatLayer::new(s, &format!("gat{k}"), width, c.gat_head_dim, c.gat_heads, r);
            width = layer.out_dim();
            gat.push(layer);
        }
        let mut mempool = Vec::with_capacity(c.mempool_centroids.len());
        for (k, &cent) in c.mempool_centroids.iter().enumerate() {
            mempool.push(MemPoolLayer::new(
                s,
                &format!("mempool{k}"),
                width,
                c.item_dim,
                cent,
                c.mempool_key_heads,
                r,
            ));
            width = c.item_dim;
        }
        let w_u = Dense::new(s, "global.w_u", c.item_dim + c.user_dim, c.item_dim, false, r);
        let tower_in = 3 * c.item_dim;
        let bn = BatchNorm::new(s, "tower.bn", tower_in);
        let mut tower = Vec::with_capacity(c.tower_dims.len());
        let mut width = tower_in;
        for (k, &h) in c.tower_dims.iter().enumerate() {
            tower.push(Dense::new(s, &format!("tower.fc{k}"), width, h, true, r));
            width = h;
        }
        let output = Dense::new(s, "tower.out", width, 1, true, r);

        Ok(Self {
            config,
            sizes,
            store,
            item_emb,
            user_emb,
            domain_emb,
            w_d,
            w_src,
            w_trg,
            ggcn,
            w_l1,
            w_l2,
            w_gsl,
            gat,
            mempool,
            w_u,
            bn,
            tower,
            output,
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.store.iter().map(|(_, _, t)| t.numel()).sum()
    }

    /// `i′ = W_d (i ∥ d)`.
    pub fn domain_contextualize(&self, tape: &mut Tape, items: Var, domains: Var) -> Result<Var> {
        let x = tape.concat_cols(&[items, domains])?;
        if tape.shape(x).1 != self.w_d.in_dim {
            let (r, c) = tape.shape(x);
            return Err(Error::dims("domain contextualization", &[r, c], &[self.w_d.in_dim]));
        }
        self.w_d.forward(tape, &self.store, x)
    }

    /// Item features for the given item/domain indices, contextualized when
    /// `use_dc` is set.
    pub fn item_features(&self, tape: &mut Tape, items: &[usize], domains: &[usize]) -> Result<Var> {
        let i = self.item_emb.lookup(tape, &self.store, items)?;
        if !self.config.use_dc {
            return Ok(i);
        }
        let d = self.domain_emb.lookup(tape, &self.store, domains)?;
        self.domain_contextualize(tape, i, d)
    }

    /// `e = ⟨W_src d_z, W_trg d_j⟩` per edge, as an `E × 1` column.
    pub fn edge_weights(&self, tape: &mut Tape, src_domains: &[usize], trg_domains: &[usize]) -> Result<Var> {
        let table = tape.param(&self.store, self.domain_emb.table)?;
        let w_src = tape.param(&self.store, self.w_src)?;
        let w_trg = tape.param(&self.store, self.w_trg)?;
        let ps = tape.matmul(table, w_src)?;
        let pt = tape.matmul(table, w_trg)?;
        let a = tape.gather(ps, src_domains)?;
        let b = tape.gather(pt, trg_domains)?;
        tape.row_dot(a, b)
    }

    /// Runs the gated convolutions and the attention readout; returns
    /// `(r_u, α)` with `r_u` of shape `B × item_dim`.
    pub fn recent_interest(&self, tape: &mut Tape, graphs: &GraphBatch, feats: Var) -> Result<(Var, Var)> {
        if graphs.n_graphs == 0 || graphs.offsets.iter().enumerate().any(|(g, _)| graphs.graph_len(g) == 0) {
            return Err(Error::contract("recent interest needs non-empty graphs"));
        }
        let weights = self.edge_weights(tape, &graphs.edge_src_domain, &graphs.edge_trg_domain)?;
        let mut h = feats;
        for layer in &self.ggcn {
            h = layer.forward(tape, &self.store, h, &graphs.edges, weights)?;
        }
        let anchor: Vec<usize> = graphs.graph_of.iter().map(|&g| graphs.last_node[g]).collect();
        let h_last = tape.gather(h, &anchor)?;
        let pair = tape.concat_cols(&[h, h_last])?;
        let hidden = self.w_l1.forward(tape, &self.store, pair)?;
        let hidden = tape.sigmoid(hidden);
        let score = self.w_l2.forward(tape, &self.store, hidden)?;
        let alpha = tape.segment_softmax(score, &graphs.graph_of, graphs.n_graphs)?;
        let weighted = tape.mul_col(h, alpha)?;
        let r = tape.segment_sum(weighted, &graphs.graph_of, graphs.n_graphs)?;
        Ok((r, alpha))
    }

    /// Learned adjacency (with self-loops) for every graph of the batch,
    /// from the current values of `feats`.
    pub fn learned_edges(&self, tape: &Tape, graphs: &GraphBatch, feats: Var) -> EdgeIndex {
        let d = self.config.item_dim;
        let heads: Vec<&[f64]> = self.w_gsl.iter().map(|&w| self.store.get(w).data()).collect();
        gsl::batch_edges(
            tape.value(feats),
            d,
            &graphs.offsets,
            graphs.n_nodes(),
            &heads,
            d,
            self.config.gsl_threshold,
        )
    }

    /// `g′ = W_u (MemPool(GAT(i′; A′)) ∥ u)`, shape `B × item_dim`.
    pub fn global_interest(
        &self,
        tape: &mut Tape,
        graphs: &GraphBatch,
        feats: Var,
        learned: &EdgeIndex,
        users: &[usize],
    ) -> Result<Var> {
        let mut x = feats;
        for layer in &self.gat {
            x = layer.forward(tape, &self.store, x, learned)?;
        }
        let mut graph_of = graphs.graph_of.clone();
        for layer in &self.mempool {
            x = layer.forward(tape, &self.store, x, &graph_of, graphs.n_graphs)?.pooled;
            graph_of = (0..graphs.n_graphs)
                .flat_map(|g| std::iter::repeat_n(g, layer.n_centroids))
                .collect();
        }
        let u = self.user_emb.lookup(tape, &self.store, users)?;
        let gu = tape.concat_cols(&[x, u])?;
        self.w_u.forward(tape, &self.store, gu)
    }

    pub fn forward(&self, tape: &mut Tape, batch: &Batch, training: bool) -> Result<ForwardOutput> {
        let b = batch.len();
        if b == 0 {
            return Err(Error::contract("forward on an empty batch"));
        }
        if training && b < 2 {
            return Err(Error::contract(format!(
                "training batches need at least 2 samples for batch norm, got {b}"
            )));
        }
        let g = &batch.graphs;
        let dim = self.config.item_dim;
        let candidate = self.item_features(tape, &batch.candidate_items, &batch.candidate_domains)?;
        let needs_nodes = self.config.use_rie || self.config.use_gie;
        let feats = if needs_nodes {
            Some(self.item_features(tape, &g.node_item, &g.node_domain)?)
        } else {
            None
        };

        let (recent, readout) = match feats {
            Some(f) if self.config.use_rie => {
                let (r, a) = self.recent_interest(tape, g, f)?;
                (r, Some(a))
            }
            _ => (tape.constant(b, dim, vec![0.0; b * dim])?, None),
        };
        let global = match feats {
            Some(f) if self.config.use_gie => {
                let learned = self.learned_edges(tape, g, f);
                self.global_interest(tape, g, f, &learned, &batch.users)?
            }
            _ => tape.constant(b, dim, vec![0.0; b * dim])?,
        };

        let x = tape.concat_cols(&[candidate, global, recent])?;
        let (mut x, bn_stats) = self.bn.forward(tape, &self.store, x, training)?;
        for layer in &self.tower {
            let y = layer.forward(tape, &self.store, x)?;
            x = tape.relu(y);
        }
        let logit = self.output.forward(tape, &self.store, x)?;
        Ok(ForwardOutput {
            prediction: tape.sigmoid(logit),
            candidate,
            recent,
            global,
            readout,
            bn_stats,
        })
    }

    /// Eval-mode click probabilities.
    pub fn predict(&self, batch: &Batch) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, batch, false)?;
        Ok(tape.value(out.prediction).to_vec())
    }
}
