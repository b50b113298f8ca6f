//! Neural building blocks recorded on an autograd [`Tape`](crate::autograd::Tape).
//!
//! Layers own [`ParamId`](crate::autograd::ParamId) handles into a shared
//! [`ParamStore`](crate::autograd::ParamStore); their forwards take the store
//! by shared reference so a single store can back many tapes.

mod batchnorm;
mod dense;
mod embedding;
mod gat;
mod ggcn;
mod mempool;

pub use batchnorm::{BatchNorm, BatchStats};
pub use dense::Dense;
pub use embedding::Embedding;
pub use gat::GatLayer;
pub use ggcn::GgcnLayer;
pub use mempool::{MemPoolLayer, MemPoolOutput};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::autograd::Tensor;

/// Directed edge list in node-index space of one (possibly batched) graph.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeIndex {
    pub src: Vec<usize>,
    pub trg: Vec<usize>,
}

impl EdgeIndex {
    pub fn new(src: Vec<usize>, trg: Vec<usize>) -> Self {
        assert_eq!(src.len(), trg.len(), "edge endpoint lists differ in length");
        Self { src, trg }
    }

    pub fn from_pairs(pairs: &[(usize, usize)]) -> Self {
        let (src, trg) = pairs.iter().copied().unzip();
        Self { src, trg }
    }

    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }
}

/// `uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))` matrix, trainable.
pub fn uniform_fan_in<R: Rng>(rng: &mut R, rows: usize, cols: usize, fan_in: usize) -> Tensor {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    Tensor::new(vec![rows, cols], data)
        .expect("shape")
        .with_requires_grad(true)
}

/// `normal(0, std)` matrix, trainable.
pub fn normal_init<R: Rng>(rng: &mut R, rows: usize, cols: usize, std: f64) -> Tensor {
    let dist = Normal::new(0.0, std).expect("valid std");
    let data = (0..rows * cols).map(|_| dist.sample(rng)).collect();
    Tensor::new(vec![rows, cols], data)
        .expect("shape")
        .with_requires_grad(true)
}

pub(crate) fn zeros_trainable(n: usize) -> Tensor {
    Tensor::zeros(vec![n]).with_requires_grad(true)
}

#[cfg(test)]
pub(crate) mod reference {
    //! Plain-loop reference implementations used as test oracles.

    pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[i * n + j] = (0..k).map(|t| a[i * k + t] * b[t * n + j]).sum();
            }
        }
        out
    }

    pub fn sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }
}
