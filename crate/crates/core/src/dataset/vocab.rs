use std::collections::{BTreeSet, HashMap};

use super::{DatasetSplit, DomainId, ItemId, UserId};

/// Dense 1-based indices for raw ids; index 0 stands for padding/unknown.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocab {
    pub items: Vec<ItemId>,
    pub users: Vec<UserId>,
    pub domains: Vec<DomainId>,
    item_index: HashMap<ItemId, usize>,
    user_index: HashMap<UserId, usize>,
    domain_index: HashMap<DomainId, usize>,
}

impl Vocab {
    pub fn new(items: Vec<ItemId>, users: Vec<UserId>, domains: Vec<DomainId>) -> Self {
        let index = |v: &[u64]| v.iter().enumerate().map(|(i, &x)| (x, i + 1)).collect::<HashMap<_, _>>();
        let domain_index = domains.iter().enumerate().map(|(i, &d)| (d, i + 1)).collect();
        Self {
            item_index: index(&items),
            user_index: index(&users),
            domain_index,
            items,
            users,
            domains,
        }
    }

    /// Sorted ids seen anywhere in the split (histories and candidates).
    pub fn from_split(split: &DatasetSplit) -> Self {
        let mut items = BTreeSet::new();
        let mut users = BTreeSet::new();
        let mut domains: BTreeSet<DomainId> = split.ctr.keys().copied().collect();
        for s in split.all() {
            users.insert(s.user);
            items.insert(s.candidate_item);
            domains.insert(s.candidate_domain);
            for &(i, d) in &s.history {
                items.insert(i);
                domains.insert(d);
            }
        }
        Self::new(
            items.into_iter().collect(),
            users.into_iter().collect(),
            domains.into_iter().collect(),
        )
    }

    pub fn item(&self, id: ItemId) -> usize {
        self.item_index.get(&id).copied().unwrap_or(0)
    }

    pub fn user(&self, id: UserId) -> usize {
        self.user_index.get(&id).copied().unwrap_or(0)
    }

    pub fn domain(&self, id: DomainId) -> usize {
        self.domain_index.get(&id).copied().unwrap_or(0)
    }

    /// Table sizes including the reserved row.
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.items.len() + 1, self.users.len() + 1, self.domains.len() + 1)
    }
}
