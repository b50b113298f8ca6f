use std::collections::{BTreeMap, BTreeSet, HashSet};

use log::warn;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{sort_records, DomainId, InteractionRecord, ItemId, UserId};

/// Per-domain target positive rate.
pub type CtrTable = BTreeMap<DomainId, f64>;

pub const CTR_RANGE: (f64, f64) = (0.2, 0.8);

#[derive(Debug, Clone, PartialEq)]
pub struct NegativeSampling {
    /// Positives and negatives sorted by `(user, ts)`; each positive is
    /// followed by its negatives.
    pub records: Vec<InteractionRecord>,
    pub ctr: CtrTable,
    /// Positives for which fewer distinct unseen items existed than needed.
    pub shortfall_events: usize,
}

/// Draws a CTR per domain from `Uniform(0.2, 0.8)` and samples negatives.
pub fn negative_sample(records: &[InteractionRecord], seed: u64) -> NegativeSampling {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domains: BTreeSet<DomainId> = records.iter().map(|r| r.domain).collect();
    let ctr = domains
        .into_iter()
        .map(|d| (d, rng.random_range(CTR_RANGE.0..CTR_RANGE.1)))
        .collect();
    sample_with(records, ctr, &mut rng)
}

/// Negative sampling against a fixed CTR table.
pub fn negative_sample_with_ctr(
    records: &[InteractionRecord],
    ctr: CtrTable,
    seed: u64,
) -> NegativeSampling {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(records, ctr, &mut rng)
}

fn sample_with(records: &[InteractionRecord], ctr: CtrTable, rng: &mut ChaCha8Rng) -> NegativeSampling {
    let mut sorted: Vec<InteractionRecord> = records.iter().copied().filter(|r| r.label == 1).collect();
    sort_records(&mut sorted);

    let mut catalog: BTreeMap<DomainId, BTreeSet<ItemId>> = BTreeMap::new();
    for r in &sorted {
        catalog.entry(r.domain).or_default().insert(r.item);
    }
    let catalog: BTreeMap<DomainId, Vec<ItemId>> =
        catalog.into_iter().map(|(d, s)| (d, s.into_iter().collect())).collect();

    let mut out = Vec::with_capacity(sorted.len() * 2);
    let mut shortfall = 0;
    let mut start = 0;
    while start < sorted.len() {
        let user: UserId = sorted[start].user;
        let end = start + sorted[start..].iter().take_while(|r| r.user == user).count();
        let seen: HashSet<ItemId> = sorted[start..end].iter().map(|r| r.item).collect();
        let unseen: BTreeMap<DomainId, Vec<ItemId>> = catalog
            .iter()
            .map(|(&d, items)| (d, items.iter().copied().filter(|i| !seen.contains(i)).collect()))
            .collect();

        for pos in &sorted[start..end] {
            out.push(*pos);
            let c = ctr.get(&pos.domain).copied().unwrap_or(0.5);
            let ratio = (1.0 - c) / c;
            let base = ratio.floor();
            let k = base as usize + usize::from(rng.random::<f64>() < ratio - base);
            if k == 0 {
                continue;
            }
            let pool = &unseen[&pos.domain];
            if pool.len() < k {
                shortfall += 1;
                warn!(
                    "user {} has {} unseen items in domain {}, needs {k}; sampling with replacement",
                    user,
                    pool.len(),
                    pos.domain
                );
                if pool.is_empty() {
                    continue;
                }
                for _ in 0..k {
                    let item = pool[rng.random_range(0..pool.len())];
                    out.push(InteractionRecord { item, label: 0, ..*pos });
                }
            } else {
                for idx in sample_indices(rng, pool.len(), k) {
                    out.push(InteractionRecord {
                        item: pool[idx],
                        label: 0,
                        ..*pos
                    });
                }
            }
        }
        start = end;
    }
    NegativeSampling {
        records: out,
        ctr,
        shortfall_events: shortfall,
    }
}
