//! Trains a small model on synthetic data and reports validation and test
//! metrics as a table and as CSV.

use magrec::dataset::SyntheticConfig;
use magrec::harness::{evaluate, load_split, train, DataSource, PreparedData, RunConfig};
use magrec::model::MagrecConfig;

fn main() -> magrec::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let run = RunConfig {
        data: DataSource::Synthetic(SyntheticConfig {
            n_users: 80,
            ..SyntheticConfig::default()
        }),
        model: MagrecConfig {
            item_dim: 16,
            user_dim: 16,
            domain_dim: 16,
            edge_dim: 16,
            gat_head_dim: 8,
            mempool_centroids: vec![8, 4, 1],
            tower_dims: vec![32, 16],
            batch_size: 64,
            ..MagrecConfig::default()
        },
        epochs: 8,
        ..RunConfig::default()
    };
    let data = PreparedData::new(&load_split(&run)?, run.repr)?;
    let outcome = train(&run, &data)?;
    println!("best epoch {}\n{}", outcome.best_epoch, outcome.best().validation.to_table());
    let test = evaluate(&outcome.model, &data.test, run.eval_batch_size, run.seed, outcome.best_epoch)?;
    println!("test\n{}", test.to_table());
    print!("{}", test.to_csv());
    print!("{}", outcome.history_csv());
    Ok(())
}
