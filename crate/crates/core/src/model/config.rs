use crate::config::{join_list, KeyValues};
use crate::error::{Error, Result};

/// Architecture and optimization hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MagrecConfig {
    pub item_dim: usize,
    pub user_dim: usize,
    pub domain_dim: usize,
    /// Width of the `W_src d_z` / `W_trg d_j` projections used for edge weights.
    pub edge_dim: usize,
    pub ggcn_layers: usize,
    pub gat_layers: usize,
    pub gat_heads: usize,
    pub gat_head_dim: usize,
    pub mempool_centroids: Vec<usize>,
    pub mempool_key_heads: usize,
    pub gsl_heads: usize,
    pub gsl_threshold: f64,
    pub tower_dims: Vec<usize>,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub use_rie: bool,
    pub use_gie: bool,
    pub use_dc: bool,
}

impl Default for MagrecConfig {
    fn default() -> Self {
        Self {
            item_dim: 64,
            user_dim: 64,
            domain_dim: 128,
            edge_dim: 128,
            ggcn_layers: 2,
            gat_layers: 1,
            gat_heads: 2,
            gat_head_dim: 32,
            mempool_centroids: vec![32, 10, 1],
            mempool_key_heads: 2,
            gsl_heads: 2,
            gsl_threshold: 0.5,
            tower_dims: vec![128, 64],
            learning_rate: 1e-3,
            weight_decay: 0.0,
            batch_size: 512,
            use_rie: true,
            use_gie: true,
            use_dc: true,
        }
    }
}

impl MagrecConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("item_dim", self.item_dim),
            ("user_dim", self.user_dim),
            ("domain_dim", self.domain_dim),
            ("edge_dim", self.edge_dim),
            ("ggcn_layers", self.ggcn_layers),
            ("gat_layers", self.gat_layers),
            ("gat_heads", self.gat_heads),
            ("gat_head_dim", self.gat_head_dim),
            ("mempool_key_heads", self.mempool_key_heads),
            ("gsl_heads", self.gsl_heads),
            ("batch_size", self.batch_size),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !(self.gsl_threshold > 0.0 && self.gsl_threshold < 1.0) {
            return Err(Error::Config("gsl_threshold must lie in (0, 1)".into()));
        }
        if self.mempool_centroids.last() != Some(&1) || self.mempool_centroids.contains(&0) {
            return Err(Error::Config(
                "mempool_centroids must be positive and end with 1".into(),
            ));
        }
        if self.tower_dims.contains(&0) {
            return Err(Error::Config("tower_dims must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config(
                "learning_rate must be positive and weight_decay non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Compact variant for fast experiments and gradient checks.
    pub fn tiny() -> Self {
        Self {
            item_dim: 4,
            user_dim: 3,
            domain_dim: 3,
            edge_dim: 3,
            gat_head_dim: 2,
            mempool_centroids: vec![3, 2, 1],
            tower_dims: vec![5, 4],
            ..Self::default()
        }
    }

    pub fn ablation_label(&self) -> String {
        let on: Vec<&str> = [("RIE", self.use_rie), ("GIE", self.use_gie), ("DC", self.use_dc)]
            .iter()
            .filter(|(_, b)| *b)
            .map(|(n, _)| *n)
            .collect();
        if on.is_empty() {
            "none".into()
        } else {
            on.join("+")
        }
    }

    pub fn write_kv(&self, kv: &mut KeyValues) {
        kv.set("item_dim", self.item_dim);
        kv.set("user_dim", self.user_dim);
        kv.set("domain_dim", self.domain_dim);
        kv.set("edge_dim", self.edge_dim);
        kv.set("ggcn_layers", self.ggcn_layers);
        kv.set("gat_layers", self.gat_layers);
        kv.set("gat_heads", self.gat_heads);
        kv.set("gat_head_dim", self.gat_head_dim);
        kv.set("mempool_centroids", join_list(&self.mempool_centroids));
        kv.set("mempool_key_heads", self.mempool_key_heads);
        kv.set("gsl_heads", self.gsl_heads);
        kv.set("gsl_threshold", self.gsl_threshold);
        kv.set("tower_dims", join_list(&self.tower_dims));
        kv.set("learning_rate", self.learning_rate);
        kv.set("weight_decay", self.weight_decay);
        kv.set("batch_size", self.batch_size);
        kv.set("use_rie", self.use_rie);
        kv.set("use_gie", self.use_gie);
        kv.set("use_dc", self.use_dc);
    }

    pub fn read_kv(&mut self, kv: &KeyValues) -> Result<()> {
        kv.read_into("item_dim", &mut self.item_dim)?;
        kv.read_into("user_dim", &mut self.user_dim)?;
        kv.read_into("domain_dim", &mut self.domain_dim)?;
        kv.read_into("edge_dim", &mut self.edge_dim)?;
        kv.read_into("ggcn_layers", &mut self.ggcn_layers)?;
        kv.read_into("gat_layers", &mut self.gat_layers)?;
        kv.read_into("gat_heads", &mut self.gat_heads)?;
        kv.read_into("gat_head_dim", &mut self.gat_head_dim)?;
        kv.read_list_into("mempool_centroids", &mut self.mempool_centroids)?;
        kv.read_into("mempool_key_heads", &mut self.mempool_key_heads)?;
        kv.read_into("gsl_heads", &mut self.gsl_heads)?;
        kv.read_into("gsl_threshold", &mut self.gsl_threshold)?;
        kv.read_list_into("tower_dims", &mut self.tower_dims)?;
        kv.read_into("learning_rate", &mut self.learning_rate)?;
        kv.read_into("weight_decay", &mut self.weight_decay)?;
        kv.read_into("batch_size", &mut self.batch_size)?;
        kv.read_into("use_rie", &mut self.use_rie)?;
        kv.read_into("use_gie", &mut self.use_gie)?;
        kv.read_into("use_dc", &mut self.use_dc)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let cfg = MagrecConfig::default();
        cfg.validate().unwrap();
        MagrecConfig::tiny().validate().unwrap();
        let mut kv = KeyValues::default();
        cfg.write_kv(&mut kv);
        let mut back = MagrecConfig::tiny();
        back.read_kv(&KeyValues::parse(&kv.render()).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn invalid_settings_are_rejected() {
        let bad = [
            MagrecConfig { gsl_threshold: 1.0, ..MagrecConfig::default() },
            MagrecConfig { mempool_centroids: vec![4, 2], ..MagrecConfig::default() },
            MagrecConfig { item_dim: 0, ..MagrecConfig::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn ablation_labels() {
        let cfg = MagrecConfig { use_gie: false, ..MagrecConfig::default() };
        assert_eq!(cfg.ablation_label(), "RIE+DC");
    }
}
