//! Operational noninterference: programs that differ only in `ava` literals
//! must leave the same `con` state behind, whatever the schedule.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::runtime::cloud::CloudConfig;
use crate::runtime::erased_string;
use crate::runtime::explore::{explore, ExploreError, ExploreOptions, LeafKind};
use crate::syntax::ast::{Abstraction, Identifier, Program, RawValue, Term, TermKind, Value};
use crate::syntax::label::Label;
use crate::typecheck::{typecheck_program, ProgramTypeError};

pub type Observation = BTreeMap<Identifier, String>;

/// Value of every `con` identifier on the replicas, labels erased.
pub fn con_observation(config: &CloudConfig) -> Observation {
    let Some(server) = config.servers.first() else {
        return Observation::new();
    };
    config
        .global
        .iter()
        .filter(|(id, _)| id.label == Label::Con)
        .filter_map(|(id, o)| server.store.get(o).map(|v| (*id, erased_string(v))))
        .collect()
}

#[derive(Debug, Error)]
pub enum NifError {
    #[error("ProgramsNotLowEquivalent: {0}")]
    NotLowEquivalent(String),
    #[error("{0}")]
    Type(ProgramTypeError),
    #[error("{0}")]
    Explore(ExploreError),
}

fn is_scalar(raw: &RawValue) -> bool {
    matches!(raw, RawValue::Lat(_) | RawValue::Bool(_) | RawValue::Unit)
}

/// Replaces every `ava`-labeled scalar literal by `unit@ava`.
fn mask_value(v: &Value) -> Value {
    match v {
        Value::Plain {
            raw,
            label: Label::Ava,
        } if is_scalar(raw) => Value::unit(Label::Ava),
        Value::Plain { raw, label } => {
            let raw = match raw {
                RawValue::Record(fields) => RawValue::Record(
                    fields
                        .iter()
                        .map(|(n, f)| (n.clone(), mask_value(f)))
                        .collect(),
                ),
                RawValue::Abs(abs) => RawValue::Abs(Box::new(Abstraction {
                    body: mask(&abs.body),
                    ..(**abs).clone()
                })),
                other => other.clone(),
            };
            Value::plain(raw, *label)
        }
        Value::Duplicated(t) => Value::Duplicated(Box::new(mask(t))),
    }
}

fn mask(t: &Term) -> Term {
    let mut out = t.clone();
    if let TermKind::Value(v) = &t.kind {
        out.kind = TermKind::Value(mask_value(v));
        return out;
    }
    for i in 0..t.children().len() {
        let masked = mask(t.children()[i]);
        *out.child_mut(i).expect("index in range") = masked;
    }
    out
}

/// Checks that `a` and `b` differ only in `ava`-labeled scalar literals.
pub fn low_equivalent(a: &Program, b: &Program) -> Result<(), String> {
    if a.servers != b.servers {
        return Err(format!(
            "server counts differ ({} vs {})",
            a.servers, b.servers
        ));
    }
    if a.clients.len() != b.clients.len() {
        return Err("client counts differ".into());
    }
    for (x, y) in a.clients.iter().zip(&b.clients) {
        if x.id != y.id {
            return Err(format!("client ids differ ({} vs {})", x.id, y.id));
        }
        if mask(&x.body) != mask(&y.body) {
            return Err(format!("client {} differs outside ava literals", x.id));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NifVerdict {
    pub left: BTreeSet<Observation>,
    pub right: BTreeSet<Observation>,
    /// Leaves cut by the depth bound, which do not contribute observations.
    pub bound_leaves: usize,
}

impl NifVerdict {
    pub fn equal(&self) -> bool {
        self.left == self.right
    }
}

/// Observations at every maximal (quiescent or deadlocked) leaf.
pub fn observations(
    config: &CloudConfig,
    depth: usize,
) -> Result<(BTreeSet<Observation>, usize), ExploreError> {
    let mut seen = BTreeSet::new();
    let stats = explore(config, &ExploreOptions::new(depth), &mut |c, kind| {
        if kind != LeafKind::Bound {
            seen.insert(con_observation(c));
        }
    })?;
    Ok((seen, stats.bound_leaves))
}

fn load(p: &Program) -> Result<CloudConfig, NifError> {
    let typing = typecheck_program(p).map_err(NifError::Type)?;
    Ok(CloudConfig::new(p, typing, None))
}

pub fn check_noninterference(
    a: &Program,
    b: &Program,
    depth: usize,
) -> Result<NifVerdict, NifError> {
    low_equivalent(a, b).map_err(NifError::NotLowEquivalent)?;
    let (left, lb) = observations(&load(a)?, depth).map_err(NifError::Explore)?;
    let (right, rb) = observations(&load(b)?, depth).map_err(NifError::Explore)?;
    Ok(NifVerdict {
        left,
        right,
        bound_leaves: lb + rb,
    })
}
