//! Per-node variable storage with a single tentative write slot.

use std::collections::BTreeMap;

use crate::error::StoreError;
use crate::types::Value;

/// A staged write list: `values[i]` is destined for `vars[i]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TentativeWrite {
    pub vars: Vec<String>,
    pub values: Vec<Value>,
}

impl TentativeWrite {
    pub fn new(vars: Vec<String>, values: Vec<Value>) -> Result<Self, StoreError> {
        if vars.len() != values.len() {
            return Err(StoreError::ArityMismatch {
                vars: vars.len(),
                values: values.len(),
            });
        }
        Ok(TentativeWrite { vars, values })
    }
}

/// Committed variables plus at most one pending write. Reads only ever see
/// committed values.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VarStore {
    committed: BTreeMap<String, Value>,
    tentative: Option<TentativeWrite>,
}

impl VarStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_values<I, S>(values: I) -> Self
    where
        I: IntoIterator<Item = (S, Value)>,
        S: Into<String>,
    {
        VarStore {
            committed: values.into_iter().map(|(k, v)| (k.into(), v)).collect(),
            tentative: None,
        }
    }

    pub fn get(&self, var: &str) -> Option<Value> {
        self.committed.get(var).copied()
    }

    /// Committed value, with unset variables reading as zero.
    pub fn value(&self, var: &str) -> Value {
        self.get(var).unwrap_or(0)
    }

    pub fn set(&mut self, var: impl Into<String>, value: Value) {
        self.committed.insert(var.into(), value);
    }

    pub fn committed(&self) -> &BTreeMap<String, Value> {
        &self.committed
    }

    pub fn tentative(&self) -> Option<&TentativeWrite> {
        self.tentative.as_ref()
    }

    pub fn stage(&mut self, write: TentativeWrite) -> Result<(), StoreError> {
        if self.tentative.is_some() {
            return Err(StoreError::WriteAlreadyPending);
        }
        self.tentative = Some(write);
        Ok(())
    }

    /// Moves the pending write into the committed values and clears the slot.
    pub fn apply_commit(&mut self) -> Result<TentativeWrite, StoreError> {
        let write = self.tentative.take().ok_or(StoreError::NoPendingWrite)?;
        self.write_through(&write);
        Ok(write)
    }

    pub fn discard(&mut self) -> Option<TentativeWrite> {
        self.tentative.take()
    }

    /// Writes directly to committed values, bypassing the tentative slot.
    pub fn write_through(&mut self, write: &TentativeWrite) {
        for (var, value) in write.vars.iter().zip(&write.values) {
            self.committed.insert(var.clone(), *value);
        }
    }
}
