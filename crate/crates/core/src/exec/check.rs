//! Consistency checks over recorded executions.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use super::record::{AbstractExecution, Operation, Rval};
use crate::runtime::cloud::CloudConfig;
use crate::runtime::trace::OpKind;
use crate::runtime::{erase, EventId};
use crate::syntax::ast::Value;
use crate::syntax::label::Label;

fn ok(b: bool) -> &'static str {
    if b {
        "OK"
    } else {
        "FAIL"
    }
}

/// `F(op)`: what an operation should return.
pub fn expected_return(op: &Operation) -> Value {
    match op.op {
        OpKind::Rd => erase(&op.value),
        OpKind::Wr => Value::unit(Label::Loc),
        OpKind::Ref => Value::loc(op.location, Label::Loc),
        OpKind::Eps => Value::unit(Label::Loc),
    }
}

/// Events whose return value differs from `F(OP(e))`.
pub fn rval_mismatches(exec: &AbstractExecution) -> Vec<EventId> {
    exec.op
        .iter()
        .filter(|(e, op)| match exec.rval.get(e) {
            Some(Rval::Value(v)) => erase(v) != expected_return(op),
            _ => true,
        })
        .map(|(e, _)| *e)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScVerdict {
    pub po_in_vis: bool,
    pub ar_vis_closure: bool,
    pub ar_neg_vis_closure: bool,
    pub rval_ok: bool,
    /// A pair or event explaining the first failed condition.
    pub witness: Option<String>,
}

impl ScVerdict {
    pub fn passed(&self) -> bool {
        self.po_in_vis && self.ar_vis_closure && self.ar_neg_vis_closure && self.rval_ok
    }
}

impl fmt::Display for ScVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "CHECK sc po_in_vis={} ar_vis_closure={} ar_neg_vis_closure={} rval={}",
            ok(self.po_in_vis),
            ok(self.ar_vis_closure),
            ok(self.ar_neg_vis_closure),
            ok(self.rval_ok)
        )
    }
}

/// Sequential consistency: `PO ⊆ VIS` (for pairs ending in a read),
/// `AR ; VIS ⊆ VIS`, `AR⁻¹ ; ¬VIS ⊆ ¬VIS` and `RVAL = F ∘ OP`.
pub fn check_sc(exec: &AbstractExecution) -> ScVerdict {
    let reads: BTreeSet<EventId> = exec
        .op
        .iter()
        .filter(|(_, o)| o.is_read())
        .map(|(e, _)| *e)
        .collect();
    let po = exec.program_order().filter(|_, b| reads.contains(&b));
    let po_missing = po.difference(&exec.vis);

    let ar_vis = exec.ar.compose(&exec.vis);
    let closure_missing = ar_vis.difference(&exec.vis);

    let not_vis = exec.vis.negate();
    let neg = exec.ar.inverse().compose(&not_vis);
    let neg_missing = neg.difference(&not_vis);

    let bad_rval = rval_mismatches(exec);

    let witness = if let Some((a, b)) = po_missing.first() {
        Some(format!(
            "{a} precedes {b} in program order but is not visible to it"
        ))
    } else if let Some((a, c)) = closure_missing.first() {
        Some(format!(
            "{a} is arbitrated before an event visible to {c}, but is not visible to {c}"
        ))
    } else if let Some((a, c)) = neg_missing.first() {
        Some(format!(
            "{a} is arbitrated after an event invisible to {c}, but is visible to {c}"
        ))
    } else {
        bad_rval
            .first()
            .map(|e| format!("{e} returned a value other than F(OP({e}))"))
    };

    ScVerdict {
        po_in_vis: po_missing.is_empty(),
        ar_vis_closure: closure_missing.is_empty(),
        ar_neg_vis_closure: neg_missing.is_empty(),
        rval_ok: bad_rval.is_empty(),
        witness,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EcError {
    #[error("NotQuiescent: {0}")]
    NotQuiescent(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EcVerdict {
    pub eventual_visibility: bool,
    pub rval_ok: bool,
    pub converged: bool,
    pub witness: Option<String>,
}

impl EcVerdict {
    pub fn passed(&self) -> bool {
        self.eventual_visibility && self.rval_ok && self.converged
    }
}

impl fmt::Display for EcVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "CHECK ec eventual_visibility={} rval={} converged={}",
            ok(self.eventual_visibility),
            ok(self.rval_ok),
            ok(self.converged)
        )
    }
}

/// Why `config` is not quiescent, if it is not.
pub fn quiescence_problem(config: &CloudConfig) -> Option<String> {
    if !config.mailbox.is_empty() {
        return Some(format!("{} message(s) in flight", config.mailbox.len()));
    }
    if let Some(c) = config.clients.iter().find(|c| !c.buffer.is_empty()) {
        return Some(format!("client {} has unsent messages", c.id));
    }
    if !config.enabled().is_empty() {
        return Some("steps are still enabled".into());
    }
    None
}

/// Eventual consistency at quiescence: every available write reached every
/// replica, a probe read of any replica returns the join of all replica
/// states, and the replicas are identical.
pub fn check_ec(exec: &AbstractExecution, config: &CloudConfig) -> Result<EcVerdict, EcError> {
    if let Some(why) = quiescence_problem(config) {
        return Err(EcError::NotQuiescent(why));
    }
    let mut witness = None;

    let mut delivered = true;
    for (e, op) in &exec.op {
        if op.class == Label::Ava && op.is_write() {
            if let Some(r) = config.servers.iter().position(|s| !s.seq.contains(e)) {
                delivered = false;
                witness.get_or_insert(format!("{e} never reached server {r}"));
            }
        }
    }
    let mut probes = true;
    if let Some(first) = config.servers.first() {
        for o in first
            .store
            .keys()
            .filter(|o| matches!(o.kind, Label::Ava | Label::Oac))
        {
            let mut joined: Option<Value> = None;
            for s in &config.servers {
                let Some(v) = s.store.get(o) else { continue };
                joined = Some(match joined {
                    None => v.clone(),
                    Some(j) => crate::runtime::value_join(&j, v).unwrap_or(j),
                });
            }
            let joined = joined.map(|j| erase(&j));
            for (r, s) in config.servers.iter().enumerate() {
                if s.store.get(o).map(erase) != joined {
                    probes = false;
                    witness.get_or_insert(format!(
                        "a read of {o} at server {r} misses other replicas' writes"
                    ));
                }
            }
        }
    }

    let bad_rval = rval_mismatches(exec);
    if let Some(e) = bad_rval.first() {
        witness.get_or_insert(format!("{e} returned a value other than F(OP({e}))"));
    }

    let converged = config.servers.windows(2).all(|w| w[0].store == w[1].store);
    if !converged {
        witness.get_or_insert("replica stores differ".into());
    }

    Ok(EcVerdict {
        eventual_visibility: delivered && probes,
        rval_ok: bad_rval.is_empty(),
        converged,
        witness,
    })
}
