//! Interaction logs → windowed, temporally split CTR samples.
//!
//! The pipeline is `ingest` (or `generate_synthetic`) → `negative_sample` →
//! `sliding_windows` → `temporal_split`, with [`prepare`] chaining the last
//! three.

mod ingest;
mod negative;
mod split;
mod synthetic;
mod vocab;
mod window;

pub use ingest::{ingest, ingest_reader, write_records_csv, LogFormat};
pub use negative::{negative_sample, negative_sample_with_ctr, CtrTable, NegativeSampling};
pub use split::{read_split, temporal_split, write_split, write_split_csv, DatasetSplit};
pub use synthetic::{generate_synthetic, SyntheticConfig};
pub use vocab::Vocab;
pub use window::{sliding_windows, WindowedSample, MAX_WINDOW, MIN_WINDOW};

use serde::{Deserialize, Serialize};

pub type DomainId = u32;
pub type UserId = u64;
pub type ItemId = u64;
pub type Timestamp = i64;

/// One logged event `(domain, user, item, timestamp, label)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub domain: DomainId,
    pub user: UserId,
    pub item: ItemId,
    pub ts: Timestamp,
    pub label: u8,
}

impl InteractionRecord {
    pub fn positive(domain: DomainId, user: UserId, item: ItemId, ts: Timestamp) -> Self {
        Self {
            domain,
            user,
            item,
            ts,
            label: 1,
        }
    }
}

/// Stable sort by `(user, ts)`; ties keep input order.
pub fn sort_records(records: &mut [InteractionRecord]) {
    records.sort_by_key(|r| (r.user, r.ts));
}

/// Negative sampling, windowing and splitting with the default window bounds.
pub fn prepare(positives: &[InteractionRecord], seed: u64) -> DatasetSplit {
    let sampled = negative_sample(positives, seed);
    let samples = sliding_windows(&sampled.records, MIN_WINDOW, MAX_WINDOW);
    temporal_split(samples, sampled.ctr)
}
