use std::fmt;

use serde::{Serialize, Serializer};

use super::{EventId, ServerId};
use crate::syntax::ast::{ClientId, Location, Value};
use crate::syntax::label::Label;

/// Rules that update every replica in a single step.
pub const ATOMIC_RULES: &[&str] = &[
    "E-CONREF",
    "E-CONASSIGN",
    "E-OACREF",
    "E-FLEXWRT-CON",
    "E-FLEXRD-CON",
    "E-CLONE",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Rd,
    Wr,
    Ref,
    Eps,
}

/// Where a read got its value from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Source {
    Local,
    Server(ServerId),
    AllServers,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Local => f.write_str("local"),
            Source::Server(r) => write!(f, "server {r}"),
            Source::AllServers => f.write_str("all servers"),
        }
    }
}

impl Serialize for Source {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

fn ser_value<S: Serializer>(v: &Option<Value>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.collect_str(v),
        None => s.serialize_none(),
    }
}

fn ser_loc<S: Serializer>(o: &Option<Location>, s: S) -> Result<S::Ok, S::Error> {
    match o {
        Some(o) => s.collect_str(o),
        None => s.serialize_none(),
    }
}

/// `(ℓ_c, op)`. For non-ε operations `label` is the label written in the
/// rule, while `class` says which history the event belongs to: `con` for
/// the atomic all-replica rules, `ava` for everything propagated by messages.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Action {
    pub effect: Label,
    pub op: OpKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<Label>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub event: Option<EventId>,
    #[serde(skip_serializing_if = "Option::is_none", serialize_with = "ser_loc")]
    pub location: Option<Location>,
    #[serde(skip_serializing_if = "Option::is_none", serialize_with = "ser_value")]
    pub value: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<Source>,
    /// Event snapshot used by the history rules: the read replica's seq for
    /// reads, the events common to all replicas for atomic writes, the
    /// target replica's seq (before the step) for deliveries.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub seq: Vec<EventId>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub delivery: bool,
    /// Replica-side location written by a delivery.
    #[serde(skip_serializing_if = "Option::is_none", serialize_with = "ser_loc")]
    pub target: Option<Location>,
}

impl Action {
    pub fn eps(effect: Label) -> Self {
        Action {
            effect,
            op: OpKind::Eps,
            label: None,
            class: None,
            event: None,
            location: None,
            value: None,
            source: None,
            seq: Vec::new(),
            delivery: false,
            target: None,
        }
    }

    pub fn op(
        effect: Label,
        op: OpKind,
        label: Label,
        class: Label,
        event: EventId,
        o: Location,
        v: Value,
    ) -> Self {
        Action {
            effect,
            op,
            label: Some(label),
            class: Some(class),
            event: Some(event),
            location: Some(o),
            value: Some(v),
            ..Action::eps(effect)
        }
    }

    pub fn with_source(mut self, src: Source, seq: Vec<EventId>) -> Self {
        self.source = Some(src);
        self.seq = seq;
        self
    }

    pub fn with_seq(mut self, seq: Vec<EventId>) -> Self {
        self.seq = seq;
        self
    }

    pub fn is_eps(&self) -> bool {
        self.op == OpKind::Eps
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct TraceEntry {
    pub step: usize,
    pub rule: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub client: Option<ClientId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub server: Option<ServerId>,
    pub action: Action,
    /// Value the redex reduced to, for client steps.
    #[serde(skip_serializing_if = "Option::is_none", serialize_with = "ser_value")]
    pub result: Option<Value>,
    #[serde(rename = "nodeCount", skip_serializing_if = "Option::is_none")]
    pub node_count: Option<usize>,
}

impl TraceEntry {
    pub fn is_atomic(&self) -> bool {
        ATOMIC_RULES.contains(&self.rule)
    }
}

/// Number of steps that synchronized all replicas at once.
pub fn atomic_step_count(trace: &[TraceEntry]) -> usize {
    trace.iter().filter(|e| e.is_atomic()).count()
}

pub fn trace_to_json(trace: &[TraceEntry]) -> String {
    serde_json::to_string_pretty(trace).expect("trace serialization cannot fail")
}
