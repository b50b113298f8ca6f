//! Trains the six RIE/GIE/DC combinations on one synthetic split.

use magrec::dataset::SyntheticConfig;
use magrec::harness::{ablation_run, load_split, variants_table, DataSource, PreparedData, RunConfig};
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
    let data = PreparedData::new(&load_split(&run)?, run.repr)?;
    print!("{}", variants_table(&ablation_run(&run, &data)?));
    Ok(())
}
