//! Synthetic log → negative sampling → sliding windows → temporal split,
//! written to a directory and read back.

use magrec::dataset::{
    generate_synthetic, negative_sample, read_split, sliding_windows, temporal_split, write_split, SyntheticConfig,
    MAX_WINDOW, MIN_WINDOW,
};

fn main() -> magrec::Result<()> {
    let cfg = SyntheticConfig {
        n_users: 50,
        cross_domain_strength: 0.8,
        ..SyntheticConfig::default()
    };
    let positives = generate_synthetic(&cfg)?;
    let sampled = negative_sample(&positives, 7);
    for (d, ctr) in &sampled.ctr {
        let (pos, all) = sampled
            .records
            .iter()
            .filter(|r| r.domain == *d)
            .fold((0, 0), |(p, a), r| (p + r.label as usize, a + 1));
        println!("domain {d}: target ctr {ctr:.3}, realized {:.3}", pos as f64 / all as f64);
    }
    let windows = sliding_windows(&sampled.records, MIN_WINDOW, MAX_WINDOW);
    let split = temporal_split(windows, sampled.ctr);
    println!(
        "{} positives -> {} records -> train {} / validation {} / test {}",
        positives.len(),
        sampled.records.len(),
        split.train.len(),
        split.validation.len(),
        split.test.len()
    );

    let dir = std::env::temp_dir().join("magrec-synthetic-example");
    write_split(&dir, &split)?;
    let back = read_split(&dir)?;
    println!("wrote and re-read {} ({} train samples)", dir.display(), back.train.len());
    Ok(())
}
