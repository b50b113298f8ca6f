use crate::autograd::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Batch normalization over the rows of an `m × d` input.
///
/// Running statistics live in the store as frozen tensors. A training-mode
/// forward returns the batch statistics; the caller folds them in with
/// [`BatchNorm::update_running`] once the step is committed.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub scale: ParamId,
    pub shift: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub dim: usize,
    pub momentum: f64,
    pub epsilon: f64,
}

/// Biased per-feature statistics of one training batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl BatchNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        let ones = || Tensor::vector(vec![1.0; dim]);
        Self {
            scale: store.add(format!("{name}.scale"), ones().with_requires_grad(true)),
            shift: store.add(
                format!("{name}.shift"),
                Tensor::zeros(vec![dim]).with_requires_grad(true),
            ),
            running_mean: store.add(format!("{name}.running_mean"), Tensor::zeros(vec![dim])),
            running_var: store.add(format!("{name}.running_var"), ones()),
            dim,
            momentum: 0.9,
            epsilon: 1e-5,
        }
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: Var,
        training: bool,
    ) -> Result<(Var, Option<BatchStats>)> {
        let (m, d) = tape.shape(x);
        if d != self.dim {
            return Err(Error::dims("batchnorm", &[m, d], &[self.dim]));
        }
        let scale = tape.param(store, self.scale)?;
        let shift = tape.param(store, self.shift)?;
        if training {
            if m < 2 {
                return Err(Error::contract(format!(
                    "batch norm in training mode needs at least 2 rows, got {m}"
                )));
            }
            let mean = tape.mean_rows(x)?;
            let centered = tape.sub(x, mean)?;
            let sq = tape.mul(centered, centered)?;
            let var = tape.mean_rows(sq)?;
            let stats = BatchStats {
                mean: tape.value(mean).to_vec(),
                var: tape.value(var).to_vec(),
            };
            let shifted = tape.affine(var, 1.0, self.epsilon);
            let inv_std = tape.powf(shifted, -0.5);
            let normed = tape.mul(centered, inv_std)?;
            let y = tape.mul(normed, scale)?;
            Ok((tape.add(y, shift)?, Some(stats)))
        } else {
            let rm = tape.param(store, self.running_mean)?;
            let rv = store.get(self.running_var);
            let inv: Vec<f64> = rv
                .data()
                .iter()
                .map(|v| 1.0 / (v + self.epsilon).sqrt())
                .collect();
            let inv = tape.constant(1, d, inv)?;
            let centered = tape.sub(x, rm)?;
            let normed = tape.mul(centered, inv)?;
            let y = tape.mul(normed, scale)?;
            Ok((tape.add(y, shift)?, None))
        }
    }

    /// `running = momentum * running + (1 - momentum) * batch`.
    pub fn update_running(&self, store: &mut ParamStore, stats: &BatchStats) {
        let mom = self.momentum;
        for (id, batch) in [(self.running_mean, &stats.mean), (self.running_var, &stats.var)] {
            for (r, b) in store.get_mut(id).data_mut().iter_mut().zip(batch) {
                *r = mom * *r + (1.0 - mom) * b;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_rows_normalize_to_zero() {
        let mut store = ParamStore::new();
        let bn = BatchNorm::new(&mut store, "bn", 3);
        let mut t = Tape::new();
        let x = t.constant(4, 3, [1.0, -2.0, 5.0].repeat(4)).unwrap();
        let (y, _) = bn.forward(&mut t, &store, x, true).unwrap();
        assert!(t.value(y).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn eval_with_unit_running_stats_is_affine_identity() {
        let mut store = ParamStore::new();
        let bn = BatchNorm::new(&mut store, "bn", 2);
        let mut t = Tape::new();
        let x = t.constant(1, 2, vec![0.5, -1.5]).unwrap();
        let (y, stats) = bn.forward(&mut t, &store, x, false).unwrap();
        assert!(stats.is_none());
        let k = 1.0 / (1.0f64 + 1e-5).sqrt();
        assert!((t.value(y)[0] - 0.5 * k).abs() < 1e-15);
        assert!((t.value(y)[1] + 1.5 * k).abs() < 1e-15);
    }

    #[test]
    fn batch_statistics_match_two_pass_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (m, d) = (7, 4);
        let vals: Vec<f64> = (0..m * d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut store = ParamStore::new();
        let bn = BatchNorm::new(&mut store, "bn", d);
        let mut t = Tape::new();
        let x = t.constant(m, d, vals.clone()).unwrap();
        let (y, stats) = bn.forward(&mut t, &store, x, true).unwrap();
        let stats = stats.unwrap();
        for c in 0..d {
            let col: Vec<f64> = (0..m).map(|r| vals[r * d + c]).collect();
            let mean = col.iter().sum::<f64>() / m as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m as f64;
            assert!((stats.mean[c] - mean).abs() < 1e-12);
            assert!((stats.var[c] - var).abs() < 1e-12);
            for r in 0..m {
                let expect = (vals[r * d + c] - mean) / (var + 1e-5).sqrt();
                assert!((t.value(y)[r * d + c] - expect).abs() < 1e-12);
            }
        }
        bn.update_running(&mut store, &stats);
        let rm = store.get(bn.running_mean).data();
        assert!((rm[0] - 0.1 * stats.mean[0]).abs() < 1e-15);
    }

    #[test]
    fn single_row_training_is_rejected() {
        let mut store = ParamStore::new();
        let bn = BatchNorm::new(&mut store, "bn", 2);
        let mut t = Tape::new();
        let x = t.constant(1, 2, vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            bn.forward(&mut t, &store, x, true),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(50 + seed);
            let mut store = ParamStore::new();
            let bn = BatchNorm::new(&mut store, "bn", 3);
            for id in [bn.scale, bn.shift] {
                for v in store.get_mut(id).data_mut() {
                    *v = rng.random_range(-1.0..1.0);
                }
            }
            let x = store.add(
                "x",
                super::super::uniform_fan_in(&mut rng, 4, 3, 1),
            );
            let w = store.add("w", super::super::uniform_fan_in(&mut rng, 4, 3, 1));
            let err = crate::testutil::max_grad_error(&mut store, 1e-6, |t, s| {
                let xv = t.param(s, x)?;
                let (y, _) = bn.forward(t, s, xv, true)?;
                let wv = t.param(s, w)?;
                let y = t.mul(y, wv)?;
                let y = t.tanh(y);
                Ok(t.sum(y))
            });
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }
}
