use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{DomainId, InteractionRecord, ItemId};
use crate::error::{Error, Result};

/// Parameters of the synthetic multi-domain log.
///
/// Items are grouped into latent topics shared by every domain (topic of an
/// item is its in-domain index modulo `n_topics`). Each user walks a timeline
/// of positive events; the topic of each event is drawn as:
///
/// * with probability `cross_domain_strength`, from the user's shared
///   interest: the topic of the previous event in any domain (probability
///   `carry_over`) or a draw from the user's cross-domain preference;
/// * otherwise from the domain's own process: the previous topic in that
///   domain (probability `intra_persistence`) or a draw from the user's
///   per-domain preference.
///
/// With `cross_domain_strength = 0` the per-domain subsequences are
/// independent; larger values make events in one domain predictive of the
/// next event in another.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub n_users: usize,
    pub n_items_per_domain: usize,
    pub n_domains: usize,
    pub cross_domain_strength: f64,
    pub n_topics: usize,
    pub min_events: usize,
    pub max_events: usize,
    /// Probability that the next event stays in the current domain.
    pub domain_stickiness: f64,
    pub carry_over: f64,
    pub intra_persistence: f64,
    /// Scale of the log-normal preference weights; larger is peakier.
    pub preference_sharpness: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_users: 200,
            n_items_per_domain: 50,
            n_domains: 2,
            cross_domain_strength: 0.5,
            n_topics: 5,
            min_events: 12,
            max_events: 30,
            domain_stickiness: 0.5,
            carry_over: 0.8,
            intra_persistence: 0.8,
            preference_sharpness: 1.5,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 || self.n_items_per_domain == 0 || self.n_domains == 0 || self.n_topics == 0 {
            return Err(Error::Config("synthetic counts must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.cross_domain_strength) {
            return Err(Error::Config("cross_domain_strength must lie in [0, 1]".into()));
        }
        if self.min_events == 0 || self.min_events > self.max_events {
            return Err(Error::Config("event range must satisfy 0 < min <= max".into()));
        }
        Ok(())
    }

    pub fn item_id(&self, domain: DomainId, local: usize) -> ItemId {
        1 + (domain as u64) * self.n_items_per_domain as u64 + local as u64
    }

    /// Latent topic of a generated item id.
    pub fn topic_of(&self, item: ItemId) -> usize {
        ((item - 1) as usize % self.n_items_per_domain) % self.n_topics
    }
}

fn preference<R: Rng>(rng: &mut R, n: usize, sharpness: f64) -> Vec<f64> {
    let normal = Normal::new(0.0, sharpness).expect("finite sharpness");
    let w: Vec<f64> = (0..n).map(|_| normal.sample(rng).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

fn draw<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Deterministic positive-only interaction log, sorted by `(user, ts)`.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Vec<InteractionRecord>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let items_by_topic: Vec<Vec<usize>> = (0..cfg.n_topics)
        .map(|t| (0..cfg.n_items_per_domain).filter(|i| i % cfg.n_topics == t).collect())
        .collect();

    let mut out = Vec::new();
    for u in 0..cfg.n_users {
        let user = u as u64 + 1;
        let shared = preference(&mut rng, cfg.n_topics, cfg.preference_sharpness);
        let per_domain: Vec<Vec<f64>> = (0..cfg.n_domains)
            .map(|_| preference(&mut rng, cfg.n_topics, cfg.preference_sharpness))
            .collect();
        let n_events = rng.random_range(cfg.min_events..=cfg.max_events);
        let mut ts: i64 = 1_000_000 + rng.random_range(0..86_400);
        let mut domain = rng.random_range(0..cfg.n_domains);
        let mut last_topic: Option<usize> = None;
        let mut last_in_domain: Vec<Option<usize>> = vec![None; cfg.n_domains];

        for k in 0..n_events {
            if k > 0 && cfg.n_domains > 1 && !rng.random_bool(cfg.domain_stickiness) {
                domain = rng.random_range(0..cfg.n_domains);
            }
            let topic = if rng.random_bool(cfg.cross_domain_strength) {
                match last_topic {
                    Some(t) if rng.random_bool(cfg.carry_over) => t,
                    _ => draw(&mut rng, &shared),
                }
            } else {
                match last_in_domain[domain] {
                    Some(t) if rng.random_bool(cfg.intra_persistence) => t,
                    _ => draw(&mut rng, &per_domain[domain]),
                }
            };
            let pool = &items_by_topic[topic];
            let local = if pool.is_empty() {
                rng.random_range(0..cfg.n_items_per_domain)
            } else {
                pool[rng.random_range(0..pool.len())]
            };
            last_topic = Some(topic);
            last_in_domain[domain] = Some(topic);
            out.push(InteractionRecord::positive(
                domain as DomainId,
                user,
                cfg.item_id(domain as DomainId, local),
                ts,
            ));
            ts += rng.random_range(1..3_600);
        }
    }
    Ok(out)
}
