//! Well-formedness of configurations, checked by re-typing every stored
//! value, mapping, message and running term.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::cloud::CloudConfig;
use super::Message;
use crate::syntax::ast::{Identifier, Location, Value};
use crate::syntax::types::subtype;
use crate::typecheck::{type_of_value, typecheck, Mode, TypeEnv};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WfViolation {
    pub rule: &'static str,
    pub detail: String,
}

impl fmt::Display for WfViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.rule, self.detail)
    }
}

fn violation(rule: &'static str, detail: String) -> WfViolation {
    WfViolation { rule, detail }
}

fn check_store(
    rule: &'static str,
    owner: &str,
    store: &BTreeMap<Location, Value>,
    env: &TypeEnv,
    out: &mut Vec<WfViolation>,
) {
    for (o, v) in store {
        let Some(expected) = env.store.get(o) else {
            out.push(violation(
                rule,
                format!("{owner}: {o} is stored but has no store type"),
            ));
            continue;
        };
        match type_of_value(env, v) {
            Ok(ty) if subtype(&ty, expected) => {}
            Ok(ty) => out.push(violation(
                rule,
                format!("{owner}: {o} holds {ty}, expected {expected}"),
            )),
            Err(e) => out.push(violation(rule, format!("{owner}: {o}: {e}"))),
        }
    }
}

fn check_ids(
    rule: &'static str,
    owner: &str,
    ids: &BTreeMap<Identifier, Location>,
    env: &TypeEnv,
    out: &mut Vec<WfViolation>,
) {
    for (id, o) in ids {
        let Some(expected) = env.ids.get(id) else {
            out.push(violation(
                rule,
                format!("{owner}: {id} has no identifier type"),
            ));
            continue;
        };
        match env.store.get(o) {
            Some(actual) if subtype(actual, expected) => {}
            Some(actual) => out.push(violation(
                rule,
                format!("{owner}: {id} names {o} of {actual}, expected {expected}"),
            )),
            None => out.push(violation(
                rule,
                format!("{owner}: {id} names {o}, which has no store type"),
            )),
        }
    }
}

fn check_message(m: &Message, env: &TypeEnv, out: &mut Vec<WfViolation>) {
    match m {
        Message::Update { loc, value, .. } => match (env.store.get(loc), type_of_value(env, value))
        {
            (Some(expected), Ok(ty)) if subtype(&ty, expected) => {}
            (Some(expected), Ok(ty)) => out.push(violation(
                "WF-MSG",
                format!("update of {loc} carries {ty}, expected {expected}"),
            )),
            (None, _) => out.push(violation("WF-MSG", format!("update of untyped {loc}"))),
            (_, Err(e)) => out.push(violation("WF-MSG", format!("update of {loc}: {e}"))),
        },
        Message::Req { id, .. } => {
            if !env.ids.contains_key(id) {
                out.push(violation("WF-MSG", format!("request for unknown {id}")));
            }
        }
    }
}

/// All violations of the well-formedness rules; empty means well formed.
pub fn check_wf(config: &CloudConfig) -> Vec<WfViolation> {
    let mut out = Vec::new();
    let base = TypeEnv::new()
        .with_mode(Mode::Runtime)
        .with_store(config.sigma.clone());

    for c in &config.clients {
        let env = base.clone().with_ids(config.typing.ids_for(c.id));
        let owner = format!("client {}", c.id);
        check_store("WF-STORE", &owner, &c.store, &env, &mut out);
        check_ids("WF-LOCALLAMBDA", &owner, &c.idmap, &env, &mut out);
        for m in &c.buffer {
            check_message(m, &env, &mut out);
        }
        if c.fault.is_none() {
            if let Err(e) = typecheck(&env, &c.term) {
                out.push(violation("WF-PROGRAMCONFIG", format!("{owner}: {e}")));
            }
        }
    }

    let shared = base.clone().with_ids(config.typing.shared.clone());
    for m in &config.mailbox {
        check_message(m, &shared, &mut out);
    }
    for (r, s) in config.servers.iter().enumerate() {
        check_store(
            "WF-SERVER",
            &format!("server {r}"),
            &s.store,
            &shared,
            &mut out,
        );
    }
    check_ids(
        "WF-GLOBALLAMBDA",
        "global",
        &config.global,
        &shared,
        &mut out,
    );

    // Every typed location is named by some identifier, or is an interior
    // clone node, and every named location is typed.
    let mut named: BTreeSet<Location> = config.global.values().copied().collect();
    for c in &config.clients {
        named.extend(c.idmap.values().copied());
    }
    named.extend(config.anonymous.iter().copied());
    let typed: BTreeSet<Location> = config.sigma.keys().copied().collect();
    for o in typed.difference(&named) {
        out.push(violation(
            "WF-CONFIG",
            format!("{o} is typed but no identifier names it"),
        ));
    }
    for o in named.difference(&typed) {
        out.push(violation(
            "WF-CONFIG",
            format!("{o} is named but has no store type"),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::schedule::{run, Scheduler};
    use crate::syntax::label::Label;

    #[test]
    fn initial_config_is_well_formed() {
        let c =
            CloudConfig::from_source("client 0 { ref@con(nat 1 @con, (con, 1)) }", None).unwrap();
        assert!(check_wf(&c).is_empty());
    }

    #[test]
    fn final_config_is_well_formed() {
        let src = "client 0 { let r = ref@ava(nat 1 @ava, (ava, 1)) in r := nat 4 @ava }
                   client 1 { !await((ava, 1)) }";
        let r = run(
            CloudConfig::from_source(src, None).unwrap(),
            Scheduler::DrainFair,
            500,
        );
        assert_eq!(check_wf(&r.config), vec![]);
    }

    #[test]
    fn corrupted_store_is_reported() {
        let src = "client 0 { ref@con(nat 1 @con, (con, 1)) }";
        let mut r = run(
            CloudConfig::from_source(src, None).unwrap(),
            Scheduler::DrainFair,
            50,
        )
        .config;
        let o = *r.global.values().next().unwrap();
        r.servers[1]
            .store
            .insert(o, Value::boolean(true, Label::Con));
        let v = check_wf(&r);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, "WF-SERVER");
    }
}
