//! Per-domain logloss and AUC with an undefined AUC for a single-class domain.

use magrec::harness::{auc, MetricsReport};

fn main() -> magrec::Result<()> {
    println!("auc of a perfect ranking: {}", auc(&[0.9, 0.1], &[1.0, 0.0])?);
    println!("auc with all scores tied: {}", auc(&[0.3; 4], &[1.0, 0.0, 0.0, 1.0])?);

    let scores = [0.8, 0.3, 0.6, 0.4, 0.7, 0.9];
    let labels = [1.0, 0.0, 1.0, 0.0, 1.0, 1.0];
    let domains = [0, 0, 0, 0, 1, 1];
    let report = MetricsReport::compute(&scores, &labels, &domains, 0, 1)?;
    print!("{}", report.to_table());
    print!("{}", report.to_csv());
    Ok(())
}
