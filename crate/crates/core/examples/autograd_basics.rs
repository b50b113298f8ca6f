//! Reverse-mode gradients of a small two-layer network, checked against a
//! central difference.

use magrec::autograd::{ParamStore, Tape, Tensor};

fn main() -> magrec::Result<()> {
    let mut store = ParamStore::new();
    let w1 = store.add("w1", Tensor::from_rows(&[vec![0.5, -0.3], vec![0.8, 0.1]])?.with_requires_grad(true));
    let w2 = store.add("w2", Tensor::from_rows(&[vec![1.2], vec![-0.7]])?.with_requires_grad(true));
    let x = [0.4, -1.1, 2.0, 0.3];
    let labels = [1.0, 0.0];

    let loss_of = |tape: &mut Tape, store: &ParamStore| -> magrec::Result<_> {
        let xv = tape.constant(2, 2, x.to_vec())?;
        let a = tape.param(store, w1)?;
        let h = tape.matmul(xv, a)?;
        let h = tape.tanh(h);
        let b = tape.param(store, w2)?;
        let logit = tape.matmul(h, b)?;
        let p = tape.sigmoid(logit);
        tape.bce_loss(p, &labels)
    };

    let mut tape = Tape::new();
    let loss = loss_of(&mut tape, &store)?;
    println!("loss = {:.6}", tape.scalar(loss));
    tape.backward(loss, &mut store)?;
    let analytic = store.get(w1).grad().unwrap()[0];

    let h = 1e-5;
    let probe = |delta: f64| {
        let mut s = store.clone();
        s.get_mut(w1).data_mut()[0] += delta;
        let mut t = Tape::new();
        let l = loss_of(&mut t, &s).unwrap();
        t.scalar(l)
    };
    let numeric = (probe(h) - probe(-h)) / (2.0 * h);
    println!("d loss / d w1[0,0]: reverse mode {analytic:.9}, central difference {numeric:.9}");
    Ok(())
}
