//! Folding a trace into an abstract execution `(OP, RVAL, RB, SP, VIS, AR)`.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value as Json};
use thiserror::Error;

use super::relation::Relation;
use crate::runtime::trace::{OpKind, TraceEntry};
use crate::runtime::{erased_string, EventId};
use crate::syntax::ast::{ClientId, Location, Value};
use crate::syntax::label::Label;

/// `op^ν_ℓ(o, v)` as recorded: `label` as written in the rule, `class`
/// the history it belongs to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Operation {
    pub op: OpKind,
    pub label: Label,
    pub class: Label,
    pub client: ClientId,
    pub location: Location,
    pub value: Value,
}

impl Operation {
    pub fn is_read(&self) -> bool {
        self.op == OpKind::Rd
    }

    pub fn is_write(&self) -> bool {
        matches!(self.op, OpKind::Wr | OpKind::Ref)
    }
}

/// Return value of an event; `∇` when the operation never returned.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rval {
    Value(Value),
    Nabla,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AbstractExecution {
    pub op: BTreeMap<EventId, Operation>,
    pub rval: BTreeMap<EventId, Rval>,
    pub rb: Relation,
    pub sp: BTreeMap<ClientId, BTreeSet<EventId>>,
    pub vis: Relation,
    pub ar: Relation,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("MalformedTrace: step {step}: {why}")]
    MalformedTrace { step: usize, why: String },
}

fn malformed<T>(e: &TraceEntry, why: impl Into<String>) -> Result<T, RecordError> {
    Err(RecordError::MalformedTrace {
        step: e.step,
        why: why.into(),
    })
}

impl AbstractExecution {
    pub fn events(&self) -> BTreeSet<EventId> {
        self.op.keys().copied().collect()
    }

    /// `PO = RB ∩ SP`: returns-before restricted to same-client pairs.
    pub fn program_order(&self) -> Relation {
        let client_of: BTreeMap<EventId, ClientId> =
            self.op.iter().map(|(e, o)| (*e, o.client)).collect();
        self.rb
            .filter(|a, b| client_of.contains_key(&a) && client_of.get(&a) == client_of.get(&b))
    }

    /// Restriction to the events of one history class.
    pub fn project(&self, class: Label) -> AbstractExecution {
        let keep: BTreeSet<EventId> = self
            .op
            .iter()
            .filter(|(_, o)| o.class == class)
            .map(|(e, _)| *e)
            .collect();
        AbstractExecution {
            op: self
                .op
                .iter()
                .filter(|(e, _)| keep.contains(e))
                .map(|(e, o)| (*e, o.clone()))
                .collect(),
            rval: self
                .rval
                .iter()
                .filter(|(e, _)| keep.contains(e))
                .map(|(e, v)| (*e, v.clone()))
                .collect(),
            rb: self.rb.restrict(&keep),
            sp: self
                .sp
                .iter()
                .map(|(c, es)| (*c, es.intersection(&keep).copied().collect::<BTreeSet<_>>()))
                .filter(|(_, es)| !es.is_empty())
                .collect(),
            vis: self.vis.restrict(&keep),
            ar: self.ar.restrict(&keep),
        }
    }

    pub fn to_json(&self) -> Json {
        let pairs = |r: &Relation| -> Vec<[String; 2]> {
            r.pairs
                .iter()
                .map(|(a, b)| [a.to_string(), b.to_string()])
                .collect()
        };
        let op: serde_json::Map<String, Json> = self
            .op
            .iter()
            .map(|(e, o)| {
                (
                    e.to_string(),
                    json!({
                        "op": o.op,
                        "label": o.label,
                        "class": o.class,
                        "client": o.client,
                        "location": o.location.to_string(),
                        "value": erased_string(&o.value),
                    }),
                )
            })
            .collect();
        let rval: serde_json::Map<String, Json> = self
            .rval
            .iter()
            .map(|(e, v)| {
                let v = match v {
                    Rval::Value(v) => erased_string(v),
                    Rval::Nabla => "∇".into(),
                };
                (e.to_string(), Json::String(v))
            })
            .collect();
        let sp: serde_json::Map<String, Json> = self
            .sp
            .iter()
            .map(|(c, es)| {
                (
                    c.to_string(),
                    json!(es.iter().map(|e| e.to_string()).collect::<Vec<_>>()),
                )
            })
            .collect();
        json!({
            "events": self.op.keys().map(|e| e.to_string()).collect::<Vec<_>>(),
            "op": op,
            "rval": rval,
            "rb": pairs(&self.rb),
            "sp": sp,
            "vis": pairs(&self.vis),
            "ar": pairs(&self.ar),
        })
    }
}

/// Applies one trace entry (A-READ, A-WRITE-1, A-WRITE-2, A-MSGPROCESS or
/// A-INTERNAL).
pub fn record_step(exec: &mut AbstractExecution, e: &TraceEntry) -> Result<(), RecordError> {
    let a = &e.action;
    if a.is_eps() {
        return Ok(());
    }
    let (Some(nu), Some(o), Some(v), Some(label), Some(class)) =
        (a.event, a.location, a.value.clone(), a.label, a.class)
    else {
        return malformed(e, "operation without event, location, value or label");
    };

    if a.delivery {
        if !exec.op.contains_key(&nu) {
            return malformed(e, format!("delivery of unrecorded event {nu}"));
        }
        for w in &a.seq {
            exec.ar.insert(*w, nu);
        }
        return Ok(());
    }

    let Some(client) = e.client else {
        return malformed(e, "client operation without a client");
    };
    if exec.op.contains_key(&nu) {
        return malformed(e, format!("event {nu} recorded twice"));
    }
    let prior: Vec<EventId> = exec
        .sp
        .get(&client)
        .map(|s| s.iter().copied().collect())
        .unwrap_or_default();
    let rval = match &e.result {
        Some(r) => Rval::Value(r.clone()),
        None => Rval::Nabla,
    };

    match a.op {
        OpKind::Rd => {
            if a.source.is_none() {
                return malformed(e, "read without a source snapshot");
            }
            for w in a.seq.iter().chain(&prior) {
                exec.vis.insert(*w, nu);
                exec.rb.insert(*w, nu);
            }
        }
        OpKind::Wr | OpKind::Ref if class == Label::Con => {
            for w in a.seq.iter().chain(&prior) {
                exec.rb.insert(*w, nu);
            }
            for w in &a.seq {
                exec.ar.insert(*w, nu);
            }
        }
        OpKind::Wr | OpKind::Ref => {
            for w in &prior {
                exec.rb.insert(*w, nu);
            }
        }
        OpKind::Eps => unreachable!("handled above"),
    }
    exec.op.insert(
        nu,
        Operation {
            op: a.op,
            label,
            class,
            client,
            location: o,
            value: v,
        },
    );
    exec.rval.insert(nu, rval);
    exec.sp.entry(client).or_default().insert(nu);
    Ok(())
}

pub fn record(trace: &[TraceEntry]) -> Result<AbstractExecution, RecordError> {
    let mut exec = AbstractExecution::default();
    for e in trace {
        record_step(&mut exec, e)?;
    }
    let events = exec.events();
    exec.rb = exec.rb.restrict(&events);
    exec.vis = exec.vis.restrict(&events);
    exec.ar = exec.ar.restrict(&events);
    exec.rb.universe = events.clone();
    exec.vis.universe = events.clone();
    exec.ar.universe = events;
    Ok(exec)
}
