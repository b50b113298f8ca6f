//! Central finite-difference oracle shared by unit tests.

use crate::autograd::{ParamStore, Tape, Var};
use crate::error::Result;

pub const FD_STEP: f64 = 1e-5;

/// Largest relative disagreement between reverse-mode gradients and central
/// differences over every trainable value in `store`.
///
/// Relative error is `|a - n| / max(|a|, |n|, floor)`.
pub fn max_grad_error<F>(store: &mut ParamStore, floor: f64, f: F) -> f64
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    store.zero_grad();
    let mut tape = Tape::new();
    let loss = f(&mut tape, store).unwrap();
    tape.backward(loss, store).unwrap();

    let ids: Vec<_> = store.ids().collect();
    let mut worst: f64 = 0.0;
    for id in ids {
        if !store.get(id).requires_grad() {
            continue;
        }
        let analytic = store
            .get(id)
            .grad()
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; store.get(id).numel()]);
        for j in 0..analytic.len() {
            let orig = store.get(id).data()[j];
            store.get_mut(id).data_mut()[j] = orig + FD_STEP;
            let up = eval(store, &f);
            store.get_mut(id).data_mut()[j] = orig - FD_STEP;
            let down = eval(store, &f);
            store.get_mut(id).data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let a = analytic[j];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            worst = worst.max(err);
        }
    }
    worst
}

fn eval<F>(store: &ParamStore, f: &F) -> f64
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut tape = Tape::new();
    let v = f(&mut tape, store).unwrap();
    tape.scalar(v)
}
