//! Uploading a client-local reference graph to the replicas in one step.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::runtime::cloud::CloudConfig;
use crate::runtime::trace::{Action, OpKind};
use crate::runtime::RuntimeError;
use crate::syntax::ast::{value_refs, ClientId, Identifier, Location, RawValue, Value};
use crate::syntax::label::Label;
use crate::typecheck::{type_of_value, Mode, TypeEnv};

/// The locations reachable from `root` in a client store, with their values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReferenceGraph {
    pub root: Location,
    pub nodes: BTreeMap<Location, Value>,
}

impl ReferenceGraph {
    /// Directed edges `(from, to)`, one per distinct location occurrence.
    pub fn edges(&self) -> BTreeSet<(Location, Location)> {
        self.nodes
            .iter()
            .flat_map(|(o, v)| value_refs(v).into_iter().map(move |p| (*o, p)))
            .collect()
    }

    /// Nodes in discovery order from the root (breadth first, children in
    /// location order). Used both for allocation and for isomorphism checks.
    pub fn order(&self) -> Vec<Location> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let mut queue = VecDeque::from([self.root]);
        while let Some(o) = queue.pop_front() {
            if !seen.insert(o) {
                continue;
            }
            out.push(o);
            if let Some(v) = self.nodes.get(&o) {
                queue.extend(value_refs(v));
            }
        }
        out
    }
}

pub fn reachable_graph(
    o: Location,
    store: &BTreeMap<Location, Value>,
) -> Result<ReferenceGraph, RuntimeError> {
    let mut nodes = BTreeMap::new();
    let mut stack = vec![o];
    while let Some(cur) = stack.pop() {
        if nodes.contains_key(&cur) {
            continue;
        }
        let v = store.get(&cur).ok_or(RuntimeError::DanglingLocation(cur))?;
        stack.extend(value_refs(v).into_iter().filter(|p| !nodes.contains_key(p)));
        nodes.insert(cur, v.clone());
    }
    Ok(ReferenceGraph { root: o, nodes })
}

/// Every `loc` label in the value becomes `to`, recursively, except inside
/// abstraction bodies.
pub fn upgrade_value(v: &Value, to: Label) -> Value {
    let up = |l: Label| if l == Label::Loc { to } else { l };
    match v {
        Value::Plain { raw, label } => {
            let raw = match raw {
                RawValue::Record(fields) => RawValue::Record(
                    fields
                        .iter()
                        .map(|(n, f)| (n.clone(), upgrade_value(f, to)))
                        .collect(),
                ),
                other => other.clone(),
            };
            Value::plain(raw, up(*label))
        }
        Value::Duplicated(_) => v.clone(),
    }
}

/// Graph isomorphism under a bijection fixed by discovery order: same
/// shape, and each copied value equals the original after renaming and
/// upgrading `loc` to `con`.
pub fn isomorphic(local: &ReferenceGraph, remote: &ReferenceGraph) -> bool {
    let a = local.order();
    let b = remote.order();
    if a.len() != b.len() || a.len() != local.nodes.len() || b.len() != remote.nodes.len() {
        return false;
    }
    let rename: BTreeMap<Location, Location> = a.iter().copied().zip(b.iter().copied()).collect();
    a.iter().zip(&b).all(|(x, y)| {
        let mapped =
            local.nodes[x].map_locations(&mut |o, l| (rename.get(&o).copied().unwrap_or(o), l));
        upgrade_value(&mapped, Label::Con).with_label(Label::Con)
            == remote.nodes[y].with_label(Label::Con)
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CloneOutcome {
    pub action: Action,
    /// The fresh root reference handed back to the client.
    pub root: Value,
    pub node_count: usize,
}

pub(crate) fn clone_step(
    config: &mut CloudConfig,
    client: ClientId,
    root: Location,
    id: Identifier,
    effect: Label,
) -> Result<CloneOutcome, RuntimeError> {
    let ci = config
        .client_index(client)
        .ok_or_else(|| RuntimeError::IllegalChoice(format!("no client {client}")))?;
    let graph = reachable_graph(root, &config.clients[ci].store)?;

    let mut fresh = BTreeMap::new();
    for o in graph.order() {
        let p = config.clients[ci].fresh_location(Label::Con);
        fresh.insert(o, p);
    }
    let mut rename = |o: Location, l: Label| match fresh.get(&o) {
        Some(p) => (*p, l.join(Label::Con)),
        None => (o, l),
    };
    let mut writes = Vec::with_capacity(graph.nodes.len());
    for (o, v) in &graph.nodes {
        let copied = upgrade_value(&v.map_locations(&mut rename), Label::Con)
            .join_label(effect)
            .join_label(Label::Con);
        writes.push((fresh[o], copied));
    }
    writes.sort_by_key(|(p, _)| *p);

    let nu = config.clients[ci].fresh_event();
    let common = config.atomic_install(nu, &writes);
    let new_root = fresh[&root];
    config.global.insert(id, new_root);

    for (o, p) in &fresh {
        let ty = match config.sigma.get(o) {
            Some(t) => t.upgrade(Label::Con),
            None => {
                let env = TypeEnv::new()
                    .with_mode(Mode::Runtime)
                    .with_store(config.sigma.clone());
                let stored = &writes.iter().find(|(q, _)| q == p).expect("written").1;
                type_of_value(&env, stored).unwrap_or(crate::syntax::types::Type::Unit(Label::Con))
            }
        };
        config.sigma.insert(*p, ty);
        if *p != new_root {
            config.anonymous.insert(*p);
        }
    }

    let root_value = graph.nodes[&root].clone();
    let action = Action::op(
        effect,
        OpKind::Ref,
        Label::Con,
        Label::Con,
        nu,
        new_root,
        root_value,
    )
    .with_seq(common);
    Ok(CloneOutcome {
        action,
        root: Value::loc(new_root, Label::Con),
        node_count: graph.nodes.len(),
    })
}
