use std::path::{Path, PathBuf};

use crate::config::KeyValues;
use crate::dataset::SyntheticConfig;
use crate::error::{Error, Result};
use crate::graph::Representation;
use crate::model::MagrecConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// Directory written by `write_split`.
    Split(PathBuf),
    Synthetic(SyntheticConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: DataSource,
    pub repr: Representation,
    pub model: MagrecConfig,
    pub epochs: usize,
    pub patience: usize,
    /// Model initialization and shuffling.
    pub seed: u64,
    /// Negative sampling (and synthetic generation unless set separately).
    pub data_seed: u64,
    pub eval_batch_size: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: DataSource::Synthetic(SyntheticConfig::default()),
            repr: Representation::Interacting,
            model: MagrecConfig::default(),
            epochs: 30,
            patience: 3,
            seed: 0,
            data_seed: 0,
            eval_batch_size: 512,
        }
    }
}

const SYNTH_PREFIX: &str = "synthetic.";

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.epochs == 0 || self.eval_batch_size == 0 {
            return Err(Error::Config("epochs and eval_batch_size must be positive".into()));
        }
        if let DataSource::Synthetic(s) = &self.data {
            s.validate()?;
        }
        Ok(())
    }

    /// Applies a parsed `key = value` file on top of `self`.
    pub fn apply(&mut self, kv: &KeyValues) -> Result<()> {
        let known_model = {
            let mut probe = KeyValues::default();
            self.model.write_kv(&mut probe);
            probe.keys().map(str::to_string).collect::<Vec<_>>()
        };
        let run_keys = ["data_dir", "repr", "epochs", "patience", "seed", "data_seed", "eval_batch_size"];
        let synth_keys = [
            "seed",
            "n_users",
            "n_items_per_domain",
            "n_domains",
            "cross_domain_strength",
            "n_topics",
            "min_events",
            "max_events",
            "domain_stickiness",
            "carry_over",
            "intra_persistence",
            "preference_sharpness",
        ];
        for key in kv.keys() {
            let ok = run_keys.contains(&key)
                || known_model.iter().any(|k| k == key)
                || key.strip_prefix(SYNTH_PREFIX).is_some_and(|k| synth_keys.contains(&k));
            if !ok {
                return Err(Error::Config(format!("unknown key `{key}`")));
            }
        }
        let has_synth = kv.keys().any(|k| k.starts_with(SYNTH_PREFIX));
        if let Some(dir) = kv.get("data_dir") {
            if has_synth {
                return Err(Error::Config(
                    "both data_dir and synthetic.* keys given; choose one data source".into(),
                ));
            }
            self.data = DataSource::Split(PathBuf::from(dir));
        } else if has_synth {
            let mut s = match &self.data {
                DataSource::Synthetic(s) => s.clone(),
                DataSource::Split(_) => SyntheticConfig::default(),
            };
            let p = |k: &str| format!("{SYNTH_PREFIX}{k}");
            kv.read_into(&p("seed"), &mut s.seed)?;
            kv.read_into(&p("n_users"), &mut s.n_users)?;
            kv.read_into(&p("n_items_per_domain"), &mut s.n_items_per_domain)?;
            kv.read_into(&p("n_domains"), &mut s.n_domains)?;
            kv.read_into(&p("cross_domain_strength"), &mut s.cross_domain_strength)?;
            kv.read_into(&p("n_topics"), &mut s.n_topics)?;
            kv.read_into(&p("min_events"), &mut s.min_events)?;
            kv.read_into(&p("max_events"), &mut s.max_events)?;
            kv.read_into(&p("domain_stickiness"), &mut s.domain_stickiness)?;
            kv.read_into(&p("carry_over"), &mut s.carry_over)?;
            kv.read_into(&p("intra_persistence"), &mut s.intra_persistence)?;
            kv.read_into(&p("preference_sharpness"), &mut s.preference_sharpness)?;
            self.data = DataSource::Synthetic(s);
        }
        if let Some(r) = kv.get("repr") {
            self.repr = r.parse()?;
        }
        kv.read_into("epochs", &mut self.epochs)?;
        kv.read_into("patience", &mut self.patience)?;
        kv.read_into("seed", &mut self.seed)?;
        kv.read_into("data_seed", &mut self.data_seed)?;
        kv.read_into("eval_batch_size", &mut self.eval_batch_size)?;
        self.model.read_kv(kv)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut run = Self::default();
        run.apply(&KeyValues::parse(&text)?)?;
        run.validate()?;
        Ok(run)
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        match &self.data {
            DataSource::Split(dir) => kv.set("data_dir", dir.display()),
            DataSource::Synthetic(s) => {
                let p = |k: &str| format!("{SYNTH_PREFIX}{k}");
                kv.set(p("seed"), s.seed);
                kv.set(p("n_users"), s.n_users);
                kv.set(p("n_items_per_domain"), s.n_items_per_domain);
                kv.set(p("n_domains"), s.n_domains);
                kv.set(p("cross_domain_strength"), s.cross_domain_strength);
                kv.set(p("n_topics"), s.n_topics);
                kv.set(p("min_events"), s.min_events);
                kv.set(p("max_events"), s.max_events);
                kv.set(p("domain_stickiness"), s.domain_stickiness);
                kv.set(p("carry_over"), s.carry_over);
                kv.set(p("intra_persistence"), s.intra_persistence);
                kv.set(p("preference_sharpness"), s.preference_sharpness);
            }
        }
        kv.set("repr", self.repr);
        kv.set("epochs", self.epochs);
        kv.set("patience", self.patience);
        kv.set("seed", self.seed);
        kv.set("data_seed", self.data_seed);
        kv.set("eval_batch_size", self.eval_batch_size);
        self.model.write_kv(&mut kv);
        kv
    }
}
