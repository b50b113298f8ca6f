use std::collections::HashMap;

use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a tensor held by a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
struct Entry {
    name: String,
    tensor: Tensor,
    /// Row 0 of embedding tables is the padding/unknown slot.
    skip_decay_row0: bool,
}

/// Named collection of model tensors (trainable weights and buffers such as
/// batch-norm running statistics).
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    entries: Vec<Entry>,
    by_name: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        self.insert(name.into(), tensor, false)
    }

    /// Registers an embedding table whose first row is excluded from weight decay.
    pub fn add_embedding(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        self.insert(name.into(), tensor, true)
    }

    fn insert(&mut self, name: String, tensor: Tensor, skip_decay_row0: bool) -> ParamId {
        assert!(
            !self.by_name.contains_key(&name),
            "duplicate parameter name {name}"
        );
        let id = ParamId(self.entries.len());
        self.by_name.insert(name.clone(), id);
        self.entries.push(Entry {
            name,
            tensor,
            skip_decay_row0,
        });
        id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].tensor
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].tensor
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn skips_decay_row0(&self, id: ParamId) -> bool {
        self.entries[id.0].skip_decay_row0
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> + '_ {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| (ParamId(i), e.name.as_str(), &e.tensor))
    }

    /// Number of scalar values across all trainable tensors.
    pub fn trainable_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.tensor.requires_grad())
            .map(|e| e.tensor.numel())
            .sum()
    }

    pub fn zero_grad(&mut self) {
        for e in &mut self.entries {
            e.tensor.zero_grad();
        }
    }

    /// Overwrites values of every tensor with the same name in `other`.
    pub fn load_values_from(&mut self, other: &ParamStore) -> Result<()> {
        for e in &mut self.entries {
            let id = other
                .id_of(&e.name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor `{}`", e.name)))?;
            let src = other.get(id);
            if src.shape() != e.tensor.shape() {
                return Err(Error::dims("load", e.tensor.shape(), src.shape()));
            }
            e.tensor.data_mut().copy_from_slice(src.data());
        }
        Ok(())
    }
}
