//! Saves a trained model with its vocabulary and restores it bit-exactly.

use magrec::dataset::SyntheticConfig;
use magrec::harness::{load_split, predict_all, train, DataSource, PreparedData, RunConfig};
use magrec::model::{MagrecConfig, MagrecModel};

fn main() -> magrec::Result<()> {
    let run = RunConfig {
        data: DataSource::Synthetic(SyntheticConfig {
            n_users: 30,
            ..SyntheticConfig::default()
        }),
        model: MagrecConfig {
            batch_size: 64,
            ..MagrecConfig::tiny()
        },
        epochs: 2,
        ..RunConfig::default()
    };
    let data = PreparedData::new(&load_split(&run)?, run.repr)?;
    let outcome = train(&run, &data)?;
    let path = std::env::temp_dir().join("magrec-example").join("model.ckpt");
    outcome.model.save(&path, &data.vocab, run.seed)?;
    let (restored, vocab) = MagrecModel::load(&path)?;
    assert_eq!(vocab, data.vocab);
    let before = predict_all(&outcome.model, &data.test, 256)?;
    let after = predict_all(&restored, &data.test, 256)?;
    let same = before.iter().zip(&after).all(|(a, b)| a.to_bits() == b.to_bits());
    println!(
        "{} parameters saved to {}; {} test predictions identical after reload: {same}",
        restored.parameter_count(),
        path.display(),
        after.len()
    );
    Ok(())
}
