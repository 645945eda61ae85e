//! The per-operation evaluator `f` and aggregate predicate `g`.

use std::fmt;
use std::sync::Arc;

use crate::error::SpecError;
use crate::store::{TentativeWrite, VarStore};
use crate::types::Value;

/// Frame payload available to one LRW message on the reference radio.
pub const MAX_PAYLOAD_BYTES: usize = 28;

/// What `f` produced at one neighbor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Evaluation {
    /// The negative response: the neighbor declines the operation.
    Negative,
    /// A response value for `g` and the values to write, aligned with the
    /// spec's `write_vars`.
    Respond { r: Value, writes: Vec<Value> },
}

/// `f` sees the neighbor's committed variables and the arguments carried in
/// the initiator's request.
pub type Evaluator = Arc<dyn Fn(&VarStore, &[Value]) -> Evaluation + Send + Sync>;
pub type Aggregate = Arc<dyn Fn(&[Value]) -> bool + Send + Sync>;

#[derive(Clone)]
pub struct LrwSpec {
    pub name: String,
    pub read_vars: Vec<String>,
    pub write_vars: Vec<String>,
    pub payload_bytes: usize,
    evaluator: Evaluator,
    aggregate: Aggregate,
}

impl fmt::Debug for LrwSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LrwSpec")
            .field("name", &self.name)
            .field("read_vars", &self.read_vars)
            .field("write_vars", &self.write_vars)
            .field("payload_bytes", &self.payload_bytes)
            .finish_non_exhaustive()
    }
}

impl LrwSpec {
    pub fn new<F, G>(
        name: impl Into<String>,
        read_vars: &[&str],
        write_vars: &[&str],
        payload_bytes: usize,
        evaluator: F,
        aggregate: G,
    ) -> Self
    where
        F: Fn(&VarStore, &[Value]) -> Evaluation + Send + Sync + 'static,
        G: Fn(&[Value]) -> bool + Send + Sync + 'static,
    {
        LrwSpec {
            name: name.into(),
            read_vars: read_vars.iter().map(|s| s.to_string()).collect(),
            write_vars: write_vars.iter().map(|s| s.to_string()).collect(),
            payload_bytes,
            evaluator: Arc::new(evaluator),
            aggregate: Arc::new(aggregate),
        }
    }

    /// Runs `f` and checks the write list against `write_vars`.
    pub fn evaluate(&self, store: &VarStore, args: &[Value]) -> Result<Evaluation, SpecError> {
        let eval = (self.evaluator)(store, args);
        if let Evaluation::Respond { writes, .. } = &eval {
            if writes.len() != self.write_vars.len() {
                return Err(SpecError::WriteArityMismatch {
                    expected: self.write_vars.len(),
                    got: writes.len(),
                });
            }
        }
        Ok(eval)
    }

    pub fn aggregate(&self, responses: &[Value]) -> bool {
        (self.aggregate)(responses)
    }

    pub fn tentative_write(&self, writes: Vec<Value>) -> Result<TentativeWrite, SpecError> {
        let got = writes.len();
        TentativeWrite::new(self.write_vars.clone(), writes).map_err(|_| {
            SpecError::WriteArityMismatch {
                expected: self.write_vars.len(),
                got,
            }
        })
    }
}

/// Checks the payload limit and probes `f` on a zeroed store with zero
/// arguments (one per write variable) to catch a misaligned write list.
pub fn validate_spec(spec: &LrwSpec, strict_payload: bool) -> Result<(), SpecError> {
    let probe = VarStore::with_values(spec.read_vars.iter().map(|v| (v.clone(), 0)));
    let args = vec![0; spec.write_vars.len()];
    validate_spec_with(spec, strict_payload, &probe, &args)
}

pub fn validate_spec_with(
    spec: &LrwSpec,
    strict_payload: bool,
    probe: &VarStore,
    args: &[Value],
) -> Result<(), SpecError> {
    if strict_payload && spec.payload_bytes > MAX_PAYLOAD_BYTES {
        return Err(SpecError::PayloadTooLarge {
            bytes: spec.payload_bytes,
            limit: MAX_PAYLOAD_BYTES,
        });
    }
    spec.evaluate(probe, args).map(|_| ())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SpecId(pub u16);

/// Specs registered for a scenario. Messages name a spec by id; every node
/// resolves it against the same registry.
#[derive(Clone, Debug, Default)]
pub struct SpecRegistry {
    specs: Vec<LrwSpec>,
}

impl SpecRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, spec: LrwSpec) -> SpecId {
        self.specs.push(spec);
        SpecId((self.specs.len() - 1) as u16)
    }

    pub fn get(&self, id: SpecId) -> Result<&LrwSpec, SpecError> {
        self.specs.get(id.0 as usize).ok_or(SpecError::UnknownSpec(id.0))
    }
}
