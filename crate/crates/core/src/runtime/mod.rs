//! Execution of programs against a simulated set of replicas.
//!
//! [`local`] holds the client-side reduction, [`cloud`] the configuration of
//! clients, in-flight messages and servers together with every step that
//! needs more than one client's state. [`schedule`] drives a configuration
//! to quiescence and [`explore`] enumerates all interleavings up to a depth.

pub mod cloud;
pub mod explore;
pub mod local;
pub mod schedule;
pub mod trace;
pub mod wf;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::lattice::DomainMismatch;
use crate::syntax::ast::{ClientId, Identifier, Location, RawValue, Term, Value};
use crate::syntax::label::Label;

pub use cloud::{CloudConfig, StepChoice};
pub use schedule::{run, RunOutcome, RunResult, Scheduler};
pub use trace::{Action, OpKind, TraceEntry};

pub type ServerId = usize;

/// Event identifier ν, unique per client and counter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventId {
    pub client: ClientId,
    pub counter: u64,
}

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}.{}", self.client, self.counter)
    }
}

impl Serialize for EventId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Message {
    /// `update[o, id, v, i, R, ν]`. `id` is absent when the writer had no
    /// identifier for `o`.
    Update {
        loc: Location,
        id: Option<Identifier>,
        value: Value,
        origin: ClientId,
        delivered: BTreeSet<ServerId>,
        event: EventId,
    },
    /// `req[id, i]`: ask a replica to push its state of `Λ(id)` to client `i`.
    Req { id: Identifier, origin: ClientId },
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Error)]
pub enum RuntimeError {
    #[error("DuplicatedIdentifier: {0}")]
    DuplicatedIdentifier(String),
    #[error("DomainMismatch: cannot combine {left} with {right}")]
    DomainMismatch {
        left: &'static str,
        right: &'static str,
    },
    #[error("DanglingLocation: {0} is not in the store")]
    DanglingLocation(Location),
    #[error("Stuck: {0}")]
    Stuck(String),
    #[error("IllegalChoice: {0}")]
    IllegalChoice(String),
}

impl From<DomainMismatch> for RuntimeError {
    fn from(e: DomainMismatch) -> Self {
        RuntimeError::DomainMismatch {
            left: e.left,
            right: e.right,
        }
    }
}

/// One client `⟨t | μ | b | λ⟩^i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ClientState {
    pub id: ClientId,
    pub term: Term,
    pub store: BTreeMap<Location, Value>,
    pub buffer: Vec<Message>,
    pub idmap: BTreeMap<Identifier, Location>,
    /// Next serial per location kind, indexed by label.
    pub serials: [u64; 4],
    pub next_event: u64,
    pub fault: Option<RuntimeError>,
}

impl ClientState {
    pub fn new(id: ClientId, term: Term) -> Self {
        ClientState {
            id,
            term,
            store: BTreeMap::new(),
            buffer: Vec::new(),
            idmap: BTreeMap::new(),
            serials: [0; 4],
            next_event: 0,
            fault: None,
        }
    }

    pub fn fresh_location(&mut self, kind: Label) -> Location {
        let slot = &mut self.serials[kind as usize];
        let o = Location::new(kind, self.id, *slot);
        *slot += 1;
        o
    }

    pub fn fresh_event(&mut self) -> EventId {
        let e = EventId {
            client: self.id,
            counter: self.next_event,
        };
        self.next_event += 1;
        e
    }

    /// `λ.getkey(o)`.
    pub fn getkey(&self, o: Location) -> Option<Identifier> {
        self.idmap.iter().find(|(_, l)| **l == o).map(|(id, _)| *id)
    }

    pub fn is_done(&self) -> bool {
        self.term.is_value()
    }
}

/// A replica: its store and the events it has applied, newest first.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Server {
    pub store: BTreeMap<Location, Value>,
    pub seq: Vec<EventId>,
}

/// `v₁ ∨ v₂` on labeled lattice values: lattice join of the payloads and
/// join of the labels.
pub fn value_join(a: &Value, b: &Value) -> Result<Value, RuntimeError> {
    match (a, b) {
        (
            Value::Plain {
                raw: RawValue::Lat(x),
                label: la,
            },
            Value::Plain {
                raw: RawValue::Lat(y),
                label: lb,
            },
        ) => Ok(Value::lat(x.join(y)?, la.join(*lb))),
        _ => Err(RuntimeError::Stuck(format!("cannot merge {a} with {b}"))),
    }
}

/// Drops every label (sets it to `loc`), recursively.
pub fn erase(v: &Value) -> Value {
    match v {
        Value::Plain { raw, .. } => {
            let raw = match raw {
                RawValue::Record(fields) => {
                    RawValue::Record(fields.iter().map(|(n, f)| (n.clone(), erase(f))).collect())
                }
                other => other.clone(),
            };
            Value::plain(raw, Label::Loc)
        }
        Value::Duplicated(_) => v.clone(),
    }
}

/// Label-free rendering of a value, used in observations and reports.
pub fn erased_string(v: &Value) -> String {
    match v {
        Value::Plain { raw, .. } => match raw {
            RawValue::Lat(d) => d.to_string(),
            RawValue::Bool(b) => b.to_string(),
            RawValue::Unit => "unit".into(),
            RawValue::Loc(o) => o.to_string(),
            RawValue::Abs(_) => "<fn>".into(),
            RawValue::Record(fields) => {
                let inner: Vec<String> = fields
                    .iter()
                    .map(|(n, f)| format!("{n} = {}", erased_string(f)))
                    .collect();
                format!("{{{}}}", inner.join(", "))
            }
        },
        Value::Duplicated(_) => "duplicated".into(),
    }
}
