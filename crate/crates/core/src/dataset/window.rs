use serde::{Deserialize, Serialize};

use super::{DomainId, InteractionRecord, ItemId, Timestamp, UserId};

pub const MIN_WINDOW: usize = 5;
pub const MAX_WINDOW: usize = 80;

/// A candidate event with the user's preceding positive history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowedSample {
    pub user: UserId,
    /// `(item, domain)` pairs, oldest first.
    pub history: Vec<(ItemId, DomainId)>,
    pub candidate_item: ItemId,
    pub candidate_domain: DomainId,
    pub label: u8,
    pub timestamp: Timestamp,
}

/// Emits one sample per candidate event whose history of strictly earlier
/// positives has at least `min_len` entries, keeping the last `max_len`.
///
/// `records` must be sorted by `(user, ts)`.
pub fn sliding_windows(records: &[InteractionRecord], min_len: usize, max_len: usize) -> Vec<WindowedSample> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < records.len() {
        let user = records[start].user;
        let end = start + records[start..].iter().take_while(|r| r.user == user).count();
        let events = &records[start..end];
        let positives: Vec<&InteractionRecord> = events.iter().filter(|r| r.label == 1).collect();
        // number of positives with ts strictly below the current candidate's
        let mut before = 0;
        for ev in events {
            while before < positives.len() && positives[before].ts < ev.ts {
                before += 1;
            }
            if before < min_len {
                continue;
            }
            let lo = before.saturating_sub(max_len);
            out.push(WindowedSample {
                user,
                history: positives[lo..before].iter().map(|p| (p.item, p.domain)).collect(),
                candidate_item: ev.item,
                candidate_domain: ev.domain,
                label: ev.label,
                timestamp: ev.ts,
            });
        }
        start = end;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn user(n: usize) -> Vec<InteractionRecord> {
        (0..n)
            .flat_map(|t| {
                let p = InteractionRecord::positive((t % 2) as u32, 7, t as u64, t as i64 * 10);
                let neg = InteractionRecord {
                    item: 1000 + t as u64,
                    label: 0,
                    ..p
                };
                [p, neg]
            })
            .collect()
    }

    #[test]
    fn below_minimum_emits_nothing() {
        assert!(sliding_windows(&user(4), 5, 80).is_empty());
    }

    #[test]
    fn sixth_positive_and_its_negative_get_five_items() {
        let s = sliding_windows(&user(6), 5, 80);
        assert_eq!(s.len(), 2);
        assert!(s.iter().all(|w| w.history.len() == 5 && w.timestamp == 50));
        assert_eq!(s[0].candidate_item, 5);
        assert_eq!(s[1].label, 0);
        assert_eq!(s[0].history[0], (0, 0));
    }

    #[test]
    fn long_histories_are_truncated_to_eighty() {
        let s = sliding_windows(&user(100), 5, 80);
        let last = s.last().unwrap();
        assert_eq!(last.history.len(), 80);
        assert_eq!(last.history.last().unwrap().0, 98);
        assert!(s.iter().all(|w| (5..=80).contains(&w.history.len())));
    }

    #[test]
    fn history_is_positive_only_and_strictly_earlier() {
        let s = sliding_windows(&user(20), 5, 80);
        for w in &s {
            assert!(w.history.iter().all(|&(i, _)| i < 1000));
            assert!(w.history.iter().all(|&(i, _)| (i as i64) * 10 < w.timestamp));
        }
    }
}
