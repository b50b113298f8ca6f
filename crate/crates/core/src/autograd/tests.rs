use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;
use crate::testutil::max_grad_error;

fn random_param(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, r: usize, c: usize) -> ParamId {
    let data = (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect();
    store.add(name, Tensor::new(vec![r, c], data).unwrap().with_requires_grad(true))
}

fn mat(rows: &[Vec<f64>]) -> Tensor {
    Tensor::from_rows(rows).unwrap()
}

#[test]
fn matmul_identity_and_hand_case() {
    let mut t = Tape::new();
    let i2 = t.leaf(&mat(&[vec![1.0, 0.0], vec![0.0, 1.0]])).unwrap();
    let m = t.leaf(&mat(&[vec![1.0, 2.0], vec![3.0, 4.0]])).unwrap();
    let p = t.matmul(i2, m).unwrap();
    assert_eq!(t.value(p), &[1.0, 2.0, 3.0, 4.0]);

    let a = t.leaf(&mat(&[vec![1.0, 2.0]])).unwrap();
    let b = t.leaf(&mat(&[vec![3.0], vec![4.0]])).unwrap();
    let p = t.matmul(a, b).unwrap();
    assert_eq!(t.value(p), &[11.0]);
}

#[test]
fn matmul_shape_mismatch_names_both_shapes() {
    let mut t = Tape::new();
    let a = t.constant(2, 3, vec![0.0; 6]).unwrap();
    let b = t.constant(2, 3, vec![0.0; 6]).unwrap();
    match t.matmul(a, b) {
        Err(Error::Dimension { lhs, rhs, .. }) => {
            assert_eq!(lhs, vec![2, 3]);
            assert_eq!(rhs, vec![2, 3]);
        }
        other => panic!("expected dimension error, got {other:?}"),
    }
}

#[test]
fn matmul_gradient_matches_finite_differences() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let a = random_param(&mut store, &mut rng, "a", 3, 3);
        let b = random_param(&mut store, &mut rng, "b", 3, 3);
        let err = max_grad_error(&mut store, 1e-6, |t, s| {
            let (a, b) = (t.param(s, a)?, t.param(s, b)?);
            let p = t.matmul(a, b)?;
            Ok(t.sum(p))
        });
        assert!(err < 1e-6, "seed {seed}: {err}");
    }
}

#[test]
fn elementwise_examples() {
    let mut t = Tape::new();
    let z = t.constant(1, 2, vec![0.0, -1.0]).unwrap();
    let s = t.sigmoid(z);
    let th = t.tanh(z);
    let lr = t.leaky_relu(z, 0.2);
    let r = t.relu(z);
    assert_eq!(t.value(s)[0], 0.5);
    assert_eq!(t.value(th)[0], 0.0);
    assert!((t.value(lr)[1] + 0.2).abs() < 1e-15);
    assert_eq!(t.value(r)[1], 0.0);
}

#[test]
fn broadcasting_is_leading_dimension_only() {
    let mut t = Tape::new();
    let a = t.constant(2, 3, vec![1.0; 6]).unwrap();
    let b = t.constant(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
    let c = t.add(a, b).unwrap();
    assert_eq!(t.value(c), &[2.0, 3.0, 4.0, 2.0, 3.0, 4.0]);
    let col = t.constant(2, 1, vec![1.0, 2.0]).unwrap();
    assert!(matches!(t.add(a, col), Err(Error::Dimension { .. })));
    let d = t.constant(3, 3, vec![0.0; 9]).unwrap();
    assert!(t.mul(a, d).is_err());
}

#[test]
fn elementwise_gradients_match_finite_differences() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let mut store = ParamStore::new();
        let a = random_param(&mut store, &mut rng, "a", 3, 4);
        let b = random_param(&mut store, &mut rng, "b", 1, 4);
        let err = max_grad_error(&mut store, 1e-6, |t, s| {
            let (a, b) = (t.param(s, a)?, t.param(s, b)?);
            let x = t.add(a, b)?;
            let y = t.sub(x, b)?;
            let y = t.mul(y, b)?;
            let s1 = t.sigmoid(y);
            let s2 = t.tanh(x);
            let s3 = t.leaky_relu(x, 0.2);
            let s4 = t.relu(y);
            let m = t.mul(s1, s2)?;
            let m = t.add(m, s3)?;
            let m = t.add(m, s4)?;
            let sq = t.affine(a, 0.5, 2.0);
            let p = t.powf(sq, -0.5);
            let m = t.mul(m, p)?;
            Ok(t.mean(m))
        });
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn softmax_examples() {
    let mut t = Tape::new();
    let x = t.constant(2, 2, vec![0.0, 0.0, 1000.0, 0.0]).unwrap();
    let y = t.softmax_rows(x).unwrap();
    let v = t.value(y);
    assert_eq!(&v[..2], &[0.5, 0.5]);
    assert!((v[2] - 1.0).abs() < 1e-12 && v[3] < 1e-300);
    assert!(v.iter().all(|p| p.is_finite()));
}

#[test]
fn softmax_gradient_matches_finite_differences() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let mut store = ParamStore::new();
        let x = random_param(&mut store, &mut rng, "x", 3, 5);
        let w = random_param(&mut store, &mut rng, "w", 3, 5);
        let err = max_grad_error(&mut store, 1e-6, |t, s| {
            let (x, w) = (t.param(s, x)?, t.param(s, w)?);
            let y = t.softmax_rows(x)?;
            let y = t.mul(y, w)?;
            Ok(t.sum(y))
        });
        assert!(err < 1e-5, "seed {seed}: {err}");
    }
}

#[test]
fn segment_sum_examples() {
    let mut t = Tape::new();
    let m = t.constant(2, 1, vec![1.0, 2.0]).unwrap();
    let s = t.segment_sum(m, &[0, 0], 2).unwrap();
    assert_eq!(t.value(s), &[3.0, 0.0]);

    let empty = t.constant(0, 3, vec![]).unwrap();
    let s = t.segment_sum(empty, &[], 2).unwrap();
    assert_eq!(t.shape(s), (2, 3));
    assert!(t.value(s).iter().all(|&v| v == 0.0));

    assert!(matches!(
        t.segment_sum(m, &[0, 2], 2),
        Err(Error::Index { index: 2, .. })
    ));
}

#[test]
fn segment_ops_gradients_match_finite_differences() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let mut store = ParamStore::new();
        let m = random_param(&mut store, &mut rng, "m", 6, 3);
        let w = random_param(&mut store, &mut rng, "w", 6, 1);
        let targets = [0, 2, 2, 1, 0, 3];
        let err = max_grad_error(&mut store, 1e-6, |t, s| {
            let (m, w) = (t.param(s, m)?, t.param(s, w)?);
            let a = t.segment_softmax(w, &targets, 4)?;
            let x = t.mul_col(m, a)?;
            let y = t.segment_sum(x, &targets, 4)?;
            let g = t.gather(y, &[3, 0, 0, 1])?;
            let g = t.tanh(g);
            Ok(t.sum(g))
        });
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn pooling_ops_gradients_match_finite_differences() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + seed);
        let mut store = ParamStore::new();
        let x = random_param(&mut store, &mut rng, "x", 5, 3);
        let k = random_param(&mut store, &mut rng, "k", 2, 3);
        let b = random_param(&mut store, &mut rng, "b", 5, 3);
        let segs = [0, 0, 1, 1, 1];
        let err = max_grad_error(&mut store, 1e-6, |t, s| {
            let (x, k, b) = (t.param(s, x)?, t.param(s, k)?, t.param(s, b)?);
            let d = t.sq_dist(x, k)?;
            let q = t.affine(d, 1.0, 1.0);
            let q = t.powf(q, -1.0);
            let c = t.normalize_rows(q)?;
            let p = t.segment_pool(c, x, &segs, 2)?;
            let mr = t.mean_rows(p)?;
            let rd = t.row_dot(x, b)?;
            let cat = t.concat_cols(&[x, rd])?;
            let sl = t.slice_cols(cat, 2, 2)?;
            let y = t.sigmoid(sl);
            let total = t.sum(y);
            let m2 = t.sum(mr);
            let m2 = t.tanh(m2);
            t.add(total, m2)
        });
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn bce_examples() {
    let mut t = Tape::new();
    let p = t.constant(1, 1, vec![0.5]).unwrap();
    let l = t.bce_loss(p, &[1.0]).unwrap();
    assert!((t.scalar(l) - std::f64::consts::LN_2).abs() < 1e-12);

    let p = t.constant(1, 1, vec![1.0 - 1e-7]).unwrap();
    let l = t.bce_loss(p, &[1.0]).unwrap();
    assert!((t.scalar(l) - 1e-7).abs() < 1e-12);

    let p = t.constant(2, 1, vec![0.5, 0.5]).unwrap();
    assert!(matches!(t.bce_loss(p, &[1.0]), Err(Error::Dimension { .. })));
}

#[test]
fn bce_analytic_gradient() {
    let mut store = ParamStore::new();
    let p = store.add("p", Tensor::vector(vec![0.8]).with_requires_grad(true));
    let mut t = Tape::new();
    let pv = t.param(&store, p).unwrap();
    let l = t.bce_loss(pv, &[1.0]).unwrap();
    t.backward(l, &mut store).unwrap();
    assert!((store.get(p).grad().unwrap()[0] + 1.25).abs() < 1e-12);
}

#[test]
fn backward_examples() {
    let mut store = ParamStore::new();
    let x = store.add("x", Tensor::scalar(3.0).with_requires_grad(true));
    let mut t = Tape::new();
    let xv = t.param(&store, x).unwrap();
    let sq = t.mul(xv, xv).unwrap();
    t.backward(sq, &mut store).unwrap();
    assert_eq!(store.get(x).grad().unwrap(), &[6.0]);

    let y = store.add("y", Tensor::scalar(1.0).with_requires_grad(true));
    let mut t = Tape::new();
    let yv = t.param(&store, y).unwrap();
    let s = t.add(yv, yv).unwrap();
    t.backward(s, &mut store).unwrap();
    assert_eq!(store.get(y).grad().unwrap(), &[2.0]);
}

#[test]
fn backward_rejects_non_scalar_and_second_sweep() {
    let mut store = ParamStore::new();
    let x = store.add("x", Tensor::vector(vec![1.0, 2.0]).with_requires_grad(true));
    let mut t = Tape::new();
    let xv = t.param(&store, x).unwrap();
    assert!(matches!(t.backward(xv, &mut store), Err(Error::Contract(_))));

    let mut t = Tape::new();
    let xv = t.param(&store, x).unwrap();
    let s = t.sum(xv);
    t.backward(s, &mut store).unwrap();
    assert!(matches!(t.backward(s, &mut store), Err(Error::Contract(_))));
    assert_eq!(store.get(x).grad().unwrap(), &[1.0, 1.0]);
}

#[test]
fn frozen_parameters_get_no_gradient() {
    let mut store = ParamStore::new();
    let x = store.add("x", Tensor::scalar(2.0));
    let mut t = Tape::new();
    let xv = t.param(&store, x).unwrap();
    let s = t.mul(xv, xv).unwrap();
    t.backward(s, &mut store).unwrap();
    assert!(store.get(x).grad().is_none());
}

#[test]
fn input_leaves_expose_gradients() {
    let mut t = Tape::new();
    let x = t
        .leaf(&Tensor::vector(vec![1.0, -2.0]).with_requires_grad(true))
        .unwrap();
    let y = t.mul(x, x).unwrap();
    let s = t.sum(y);
    t.backward(s, &mut ParamStore::new()).unwrap();
    assert_eq!(t.grad(x).unwrap(), &[2.0, -4.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn softmax_rows_are_distributions(
        vals in proptest::collection::vec(-50.0f64..50.0, 12)
    ) {
        let mut t = Tape::new();
        let x = t.constant(3, 4, vals).unwrap();
        let y = t.softmax_rows(x).unwrap();
        for row in t.value(y).chunks(4) {
            prop_assert!(row.iter().all(|&p| p >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn segment_sum_is_linear(
        m1 in proptest::collection::vec(-5.0f64..5.0, 10),
        m2 in proptest::collection::vec(-5.0f64..5.0, 10),
        targets in proptest::collection::vec(0usize..4, 5),
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
    ) {
        let mut t = Tape::new();
        let a = t.constant(5, 2, m1).unwrap();
        let b = t.constant(5, 2, m2).unwrap();
        let sa = t.scale(a, alpha);
        let sb = t.scale(b, beta);
        let comb = t.add(sa, sb).unwrap();
        let lhs = t.segment_sum(comb, &targets, 4).unwrap();
        let ra = t.segment_sum(a, &targets, 4).unwrap();
        let rb = t.segment_sum(b, &targets, 4).unwrap();
        let ra = t.scale(ra, alpha);
        let rb = t.scale(rb, beta);
        let rhs = t.add(ra, rb).unwrap();
        for (l, r) in t.value(lhs).iter().zip(t.value(rhs)) {
            prop_assert!((l - r).abs() < 1e-9);
        }
    }
}
