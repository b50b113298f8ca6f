//! Parses a flat `key = value` run config and overrides one value.

use magrec::config::KeyValues;
use magrec::harness::RunConfig;

const FILE: &str = "# directional experiment
repr = flattened
seed = 3
epochs = 12
synthetic.n_users = 150
synthetic.cross_domain_strength = 0.8
use_gie = false
mempool_centroids = 8,4,1
";

fn main() -> magrec::Result<()> {
    let mut run = RunConfig::default();
    run.apply(&KeyValues::parse(FILE)?)?;
    let mut flags = KeyValues::default();
    flags.set("seed", 9);
    run.apply(&flags)?;
    run.validate()?;
    print!("{}", run.to_kv().render());
    if let Err(e) = KeyValues::parse("epochs = 1\nepochs = 2").and_then(|kv| run.apply(&kv)) {
        println!("rejected: {e}");
    }
    Ok(())
}
