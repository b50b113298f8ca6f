//! Gated graph convolution, graph attention and memory pooling on a toy
//! four-node graph.

use magrec::autograd::{ParamStore, Tape};
use magrec::layers::{EdgeIndex, GatLayer, GgcnLayer, MemPoolLayer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn show(name: &str, values: &[f64], cols: usize) {
    println!("{name}:");
    for row in values.chunks(cols) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:+.4}")).collect();
        println!("  [{}]", cells.join(", "));
    }
}

fn main() -> magrec::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut store = ParamStore::new();
    let ggcn = GgcnLayer::new(&mut store, "ggcn", 3, &mut rng);
    let gat = GatLayer::new(&mut store, "gat", 3, 2, 2, &mut rng);
    let pool = MemPoolLayer::new(&mut store, "pool", 4, 4, 2, 2, &mut rng);

    let mut tape = Tape::new();
    let x = tape.constant(4, 3, vec![1.0, 0.0, 0.5, 0.2, 0.9, -0.3, -0.4, 0.1, 0.8, 0.0, -1.0, 0.3])?;
    let path = EdgeIndex::from_pairs(&[(0, 1), (1, 2), (2, 3), (0, 2)]);
    let weights = tape.constant(4, 1, vec![1.0, 0.5, 1.0, 0.25])?;
    let h = ggcn.forward(&mut tape, &store, x, &path, weights)?;
    show("gated convolution states", tape.value(h), 3);

    let mut dense: Vec<(usize, usize)> = (0..4).map(|i| (i, i)).collect();
    dense.extend([(0, 3), (3, 0), (1, 2), (2, 1)]);
    let a = gat.forward(&mut tape, &store, h, &EdgeIndex::from_pairs(&dense))?;
    show("attention output (two heads concatenated)", tape.value(a), gat.out_dim());

    let out = pool.forward(&mut tape, &store, a, &[0, 0, 0, 0], 1)?;
    show("soft cluster assignment", tape.value(out.assignment), 2);
    show("pooled centroids", tape.value(out.pooled), 4);
    Ok(())
}
