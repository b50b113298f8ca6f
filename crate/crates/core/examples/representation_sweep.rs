//! Trains once per graph representation and prints the comparison as CSV.

use magrec::dataset::SyntheticConfig;
use magrec::harness::{load_split, representation_sweep, variants_csv, variants_table, DataSource, RunConfig};
use magrec::model::MagrecConfig;

fn main() -> magrec::Result<()> {
    let run = RunConfig {
        data: DataSource::Synthetic(SyntheticConfig {
            n_users: 60,
            cross_domain_strength: 0.8,
            ..SyntheticConfig::default()
        }),
        model: MagrecConfig {
            batch_size: 64,
            ..MagrecConfig::tiny()
        },
        epochs: 5,
        ..RunConfig::default()
    };
    let rows = representation_sweep(&run, &load_split(&run)?)?;
    print!("{}", variants_table(&rows));
    print!("{}", variants_csv(&rows));
    Ok(())
}
