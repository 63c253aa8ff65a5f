//! The configuration `P | M | S | Λ` and every step of the distributed
//! semantics, including message processing.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet};
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use super::local::{
    self, location_operand, redex_at, Decomposition, Focus, LocalOutcome, LocalStep,
};
use super::trace::{Action, OpKind, Source, TraceEntry};
use super::{value_join, ClientState, EventId, Message, RuntimeError, Server, ServerId};
use crate::clone;
use crate::syntax::ast::*;
use crate::syntax::label::Label;
use crate::syntax::parser::{parse_program, Diagnostic};
use crate::syntax::types::Type;
use crate::typecheck::{
    type_of_value, typecheck_program, Mode, ProgramTypeError, ProgramTyping, TypeEnv,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "choice")]
pub enum StepChoice {
    ClientStep { client: ClientId },
    Send { client: ClientId },
    DeliverUpdate { message: usize, server: ServerId },
    GcUpdate { message: usize },
    ProcessReq { message: usize, server: ServerId },
    AwaitResolve { client: ClientId },
    AvaRemoteRead { client: ClientId, server: ServerId },
    ConRead { client: ClientId, server: ServerId },
}

impl StepChoice {
    /// Coarse category used by the fair scheduler.
    pub fn category(&self) -> usize {
        match self {
            StepChoice::ClientStep { .. }
            | StepChoice::AwaitResolve { .. }
            | StepChoice::AvaRemoteRead { .. }
            | StepChoice::ConRead { .. } => 0,
            StepChoice::Send { .. } => 1,
            StepChoice::DeliverUpdate { .. } => 2,
            StepChoice::GcUpdate { .. } => 3,
            StepChoice::ProcessReq { .. } => 4,
        }
    }

    pub const CATEGORIES: usize = 5;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClientStatus {
    Running,
    Done,
    /// At `await(id)` with `id` bound nowhere yet.
    Blocked(Identifier),
    /// At a remote read no replica can serve.
    Waiting(Location),
    Faulted(RuntimeError),
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))]
    Parse(Vec<Diagnostic>),
    #[error("{0}")]
    Type(ProgramTypeError),
}

#[derive(Clone, Debug)]
pub struct CloudConfig {
    pub clients: Vec<ClientState>,
    /// In-flight messages, kept sorted so equal multisets compare equal.
    pub mailbox: Vec<Message>,
    pub servers: Vec<Server>,
    /// Λ
    pub global: BTreeMap<Identifier, Location>,
    /// Σ: content type of every allocated location.
    pub sigma: BTreeMap<Location, Type>,
    /// Interior clone nodes, which no identifier names.
    pub anonymous: BTreeSet<Location>,
    pub typing: Arc<ProgramTyping>,
    pub trace: Vec<TraceEntry>,
}

impl PartialEq for CloudConfig {
    fn eq(&self, other: &Self) -> bool {
        self.clients == other.clients
            && self.mailbox == other.mailbox
            && self.servers == other.servers
            && self.global == other.global
            && self.sigma == other.sigma
            && self.anonymous == other.anonymous
    }
}

impl Eq for CloudConfig {}

/// Hashes the state only; the trace and the static typing are left out.
impl Hash for CloudConfig {
    fn hash<H: Hasher>(&self, h: &mut H) {
        self.clients.hash(h);
        self.mailbox.hash(h);
        self.servers.hash(h);
        self.global.hash(h);
        self.sigma.hash(h);
        self.anonymous.hash(h);
    }
}

pub fn fingerprint<T: Hash + ?Sized>(x: &T) -> u128 {
    let mut a = DefaultHasher::new();
    0xa5u8.hash(&mut a);
    x.hash(&mut a);
    let mut b = DefaultHasher::new();
    0x5au8.hash(&mut b);
    x.hash(&mut b);
    ((a.finish() as u128) << 64) | b.finish() as u128
}

impl CloudConfig {
    pub fn new(program: &Program, typing: ProgramTyping, servers: Option<usize>) -> Self {
        let n = servers.unwrap_or(program.servers).max(1);
        let mut clients: Vec<ClientState> = program
            .clients
            .iter()
            .map(|c| ClientState::new(c.id, c.body.clone()))
            .collect();
        clients.sort_by_key(|c| c.id);
        CloudConfig {
            clients,
            mailbox: Vec::new(),
            servers: vec![Server::default(); n],
            global: BTreeMap::new(),
            sigma: BTreeMap::new(),
            anonymous: BTreeSet::new(),
            typing: Arc::new(typing),
            trace: Vec::new(),
        }
    }

    /// Parses, typechecks and builds the initial configuration.
    pub fn from_source(src: &str, servers: Option<usize>) -> Result<Self, LoadError> {
        let program = parse_program(src).map_err(LoadError::Parse)?;
        let typing = typecheck_program(&program).map_err(LoadError::Type)?;
        Ok(Self::new(&program, typing, servers))
    }

    pub fn fingerprint(&self) -> u128 {
        fingerprint(self)
    }

    pub fn client_index(&self, id: ClientId) -> Option<usize> {
        self.clients.binary_search_by_key(&id, |c| c.id).ok()
    }

    pub fn client(&self, id: ClientId) -> Option<&ClientState> {
        self.client_index(id).map(|i| &self.clients[i])
    }

    pub fn server_ids(&self) -> BTreeSet<ServerId> {
        (0..self.servers.len()).collect()
    }

    /// Events present in every replica's sequence, newest first.
    pub fn common_events(&self) -> Vec<EventId> {
        let Some(first) = self.servers.first() else {
            return vec![];
        };
        first
            .seq
            .iter()
            .filter(|e| self.servers.iter().all(|s| s.seq.contains(e)))
            .copied()
            .collect()
    }

    fn focus_of(&self, ci: usize) -> Option<Focus> {
        match local::decompose(&self.clients[ci].term) {
            Decomposition::Redex(f) => Some(f),
            _ => None,
        }
    }

    pub fn client_status(&self, ci: usize) -> ClientStatus {
        let c = &self.clients[ci];
        if let Some(e) = &c.fault {
            return ClientStatus::Faulted(e.clone());
        }
        if c.is_done() {
            return ClientStatus::Done;
        }
        let Some(focus) = self.focus_of(ci) else {
            return ClientStatus::Running;
        };
        let redex = redex_at(&c.term, &focus.path);
        match &redex.kind {
            TermKind::Await(id) if !c.idmap.contains_key(id) && !self.global.contains_key(id) => {
                ClientStatus::Blocked(*id)
            }
            _ => match self.remote_read(ci) {
                Some((o, servers)) if servers.is_empty() => ClientStatus::Waiting(o),
                _ => ClientStatus::Running,
            },
        }
    }

    /// For a client whose redex reads from a replica: the location and the
    /// replicas able to serve it.
    fn remote_read(&self, ci: usize) -> Option<(Location, Vec<ServerId>)> {
        let c = &self.clients[ci];
        let focus = self.focus_of(ci)?;
        let redex = redex_at(&c.term, &focus.path);
        let o = match &redex.kind {
            TermKind::Deref(r) => {
                let (o, _) = location_operand(r).ok()?;
                match o.kind {
                    Label::Con => o,
                    Label::Ava | Label::Oac if !c.store.contains_key(&o) => o,
                    _ => return None,
                }
            }
            TermKind::FlexRead(Label::Ava, r) => {
                let (o, _) = location_operand(r).ok()?;
                if c.store.contains_key(&o) {
                    return None;
                }
                o
            }
            _ => return None,
        };
        let servers = (0..self.servers.len())
            .filter(|r| self.servers[*r].store.contains_key(&o))
            .collect();
        Some((o, servers))
    }

    pub fn enabled(&self) -> Vec<StepChoice> {
        let mut out = Vec::new();
        for (ci, c) in self.clients.iter().enumerate() {
            let client = c.id;
            match self.client_status(ci) {
                ClientStatus::Running => {
                    let focus = self.focus_of(ci);
                    let is_await2 = focus.as_ref().is_some_and(|f| {
                        matches!(&redex_at(&c.term, &f.path).kind,
                            TermKind::Await(id) if !c.idmap.contains_key(id))
                    });
                    if is_await2 {
                        out.push(StepChoice::AwaitResolve { client });
                    } else if let Some((o, servers)) = self.remote_read(ci) {
                        for server in servers {
                            if o.kind == Label::Con {
                                out.push(StepChoice::ConRead { client, server });
                            } else {
                                out.push(StepChoice::AvaRemoteRead { client, server });
                            }
                        }
                    } else {
                        out.push(StepChoice::ClientStep { client });
                    }
                }
                ClientStatus::Done
                | ClientStatus::Blocked(_)
                | ClientStatus::Waiting(_)
                | ClientStatus::Faulted(_) => {}
            }
            if !c.buffer.is_empty() {
                out.push(StepChoice::Send { client });
            }
        }
        let n = self.servers.len();
        for (m, msg) in self.mailbox.iter().enumerate() {
            if m > 0 && self.mailbox[m - 1] == *msg {
                continue;
            }
            match msg {
                Message::Update { delivered, .. } => {
                    for server in (0..n).filter(|r| !delivered.contains(r)) {
                        out.push(StepChoice::DeliverUpdate { message: m, server });
                    }
                    if delivered.len() == n {
                        out.push(StepChoice::GcUpdate { message: m });
                    }
                }
                Message::Req { id, origin } => {
                    let Some(o) = self.global.get(id) else {
                        continue;
                    };
                    let known = self
                        .client(*origin)
                        .is_some_and(|c| c.idmap.contains_key(id));
                    if !known {
                        continue;
                    }
                    for server in (0..n).filter(|r| self.servers[*r].store.contains_key(o)) {
                        out.push(StepChoice::ProcessReq { message: m, server });
                    }
                }
            }
        }
        out
    }

    pub fn is_quiescent(&self) -> bool {
        self.enabled().is_empty()
    }

    fn push_entry(
        &mut self,
        rule: &'static str,
        client: Option<ClientId>,
        server: Option<ServerId>,
        action: Action,
        result: Option<Value>,
    ) -> &TraceEntry {
        let step = self.trace.len();
        self.trace.push(TraceEntry {
            step,
            rule,
            client,
            server,
            action,
            result,
            node_count: None,
        });
        self.trace.last().expect("just pushed")
    }

    /// Static content type for a location allocated under `id`.
    fn content_type(&self, client: ClientId, id: Identifier, stored: &Value) -> Type {
        let static_ty = if id.label == Label::Loc {
            self.typing.local.get(&client).and_then(|m| m.get(&id))
        } else {
            self.typing.shared.get(&id)
        };
        match static_ty {
            Some(t) => t.clone(),
            None => {
                let env = TypeEnv::new()
                    .with_mode(Mode::Runtime)
                    .with_store(self.sigma.clone());
                type_of_value(&env, stored).unwrap_or(Type::Unit(Label::Loc))
            }
        }
    }

    fn record_allocations(&mut self, ci: usize, allocated: &[(Location, Identifier)]) {
        for (o, id) in allocated {
            let client = self.clients[ci].id;
            let stored = self.clients[ci]
                .store
                .get(o)
                .cloned()
                .unwrap_or(Value::unit(Label::Loc));
            let ty = self.content_type(client, *id, &stored);
            self.sigma.insert(*o, ty);
        }
    }

    fn insert_message(&mut self, m: Message) {
        let pos = self.mailbox.binary_search(&m).unwrap_or_else(|p| p);
        self.mailbox.insert(pos, m);
    }

    fn finish_client_step(
        &mut self,
        ci: usize,
        focus: &Focus,
        step: LocalStep,
        new: Value,
        server: Option<ServerId>,
    ) {
        local::plug(&mut self.clients[ci].term, focus, new.into());
        self.record_allocations(ci, &step.allocated);
        let client = self.clients[ci].id;
        self.push_entry(step.rule, Some(client), server, step.action, step.result);
    }

    /// Applies one enabled choice. Client faults are recorded in the client
    /// and the trace; an `Err` means the choice was not applicable.
    pub fn step(&mut self, choice: StepChoice) -> Result<&TraceEntry, RuntimeError> {
        let illegal = |why: &str| RuntimeError::IllegalChoice(format!("{choice:?}: {why}"));
        match choice {
            StepChoice::ClientStep { client } => {
                let ci = self
                    .client_index(client)
                    .ok_or_else(|| illegal("no such client"))?;
                let global = self.global.clone();
                match local::step_local(&mut self.clients[ci], &global) {
                    LocalOutcome::Stepped(step) => {
                        self.record_allocations(ci, &step.allocated);
                        Ok(
                            self.push_entry(
                                step.rule,
                                Some(client),
                                None,
                                step.action,
                                step.result,
                            ),
                        )
                    }
                    LocalOutcome::Done => Err(illegal("client has finished")),
                    LocalOutcome::Blocked(_) => Err(illegal("client is blocked")),
                    LocalOutcome::Fault(e) => {
                        self.clients[ci].fault = Some(e);
                        Ok(self.push_entry(
                            "STUCK",
                            Some(client),
                            None,
                            Action::eps(Label::Loc),
                            None,
                        ))
                    }
                    LocalOutcome::NonLocal(focus) => match self.step_atomic(ci, &focus) {
                        Ok(()) => Ok(self.trace.last().expect("step recorded")),
                        Err(e @ RuntimeError::IllegalChoice(_)) => Err(e),
                        Err(e) => {
                            self.clients[ci].fault = Some(e);
                            Ok(self.push_entry(
                                "STUCK",
                                Some(client),
                                None,
                                Action::eps(Label::Loc),
                                None,
                            ))
                        }
                    },
                }
            }
            StepChoice::AwaitResolve { client } => {
                let ci = self
                    .client_index(client)
                    .ok_or_else(|| illegal("no such client"))?;
                let focus = self.focus_of(ci).ok_or_else(|| illegal("no redex"))?;
                let id = match &redex_at(&self.clients[ci].term, &focus.path).kind {
                    TermKind::Await(id) if !self.clients[ci].idmap.contains_key(id) => *id,
                    _ => return Err(illegal("redex is not an unresolved await")),
                };
                let o = *self
                    .global
                    .get(&id)
                    .ok_or_else(|| illegal("identifier not yet published"))?;
                self.clients[ci].idmap.insert(id, o);
                let v = Value::loc(o, id.label);
                let step = LocalStep {
                    rule: "E-AWAIT2",
                    action: Action::eps(focus.effect),
                    result: Some(v.clone()),
                    allocated: vec![],
                };
                self.finish_client_step(ci, &focus, step, v, None);
                Ok(self.trace.last().expect("step recorded"))
            }
            StepChoice::ConRead { client, server }
            | StepChoice::AvaRemoteRead { client, server } => {
                let ci = self
                    .client_index(client)
                    .ok_or_else(|| illegal("no such client"))?;
                let (o, servers) = self
                    .remote_read(ci)
                    .ok_or_else(|| illegal("redex is not a remote read"))?;
                if !servers.contains(&server) {
                    return Err(illegal("replica does not hold the location"));
                }
                let is_con = matches!(choice, StepChoice::ConRead { .. });
                if is_con != (o.kind == Label::Con) {
                    return Err(illegal("wrong kind of read"));
                }
                let focus = self.focus_of(ci).expect("remote read has a redex");
                let redex = redex_at(&self.clients[ci].term, &focus.path).clone();
                let v = self.servers[server].store[&o].clone();
                let seq = self.servers[server].seq.clone();
                let effect = focus.effect;
                let nu = self.clients[ci].fresh_event();
                let (rule, action, out) = match &redex.kind {
                    TermKind::Deref(r) => {
                        let (_, hl) = location_operand(r)?;
                        if is_con {
                            let a = Action::op(
                                effect,
                                OpKind::Rd,
                                Label::Con,
                                Label::Con,
                                nu,
                                o,
                                v.clone(),
                            );
                            ("E-CONDEREF", a, v.join_label(Label::Con).join_label(hl))
                        } else {
                            self.clients[ci].store.insert(o, v.clone());
                            let a = Action::op(
                                effect,
                                OpKind::Rd,
                                Label::Ava,
                                Label::Ava,
                                nu,
                                o,
                                v.clone(),
                            );
                            ("E-AVADEREF2", a, v.join_label(Label::Ava).join_label(hl))
                        }
                    }
                    TermKind::FlexRead(..) => {
                        self.clients[ci].store.insert(o, v.clone());
                        let r = v.with_label(Label::Ava);
                        let a = Action::op(
                            effect,
                            OpKind::Rd,
                            Label::Ava,
                            Label::Ava,
                            nu,
                            o,
                            r.clone(),
                        );
                        ("E-FLEXRD-AVA", a, r)
                    }
                    _ => return Err(illegal("redex is not a read")),
                };
                let step = LocalStep {
                    rule,
                    action: action.with_source(Source::Server(server), seq),
                    result: Some(out.clone()),
                    allocated: vec![],
                };
                self.finish_client_step(ci, &focus, step, out, Some(server));
                Ok(self.trace.last().expect("step recorded"))
            }
            StepChoice::Send { client } => {
                let ci = self
                    .client_index(client)
                    .ok_or_else(|| illegal("no such client"))?;
                if self.clients[ci].buffer.is_empty() {
                    return Err(illegal("empty buffer"));
                }
                let m = self.clients[ci].buffer.remove(0);
                self.insert_message(m);
                Ok(self.push_entry("E-SEND", Some(client), None, Action::eps(Label::Loc), None))
            }
            StepChoice::GcUpdate { message } => match self.mailbox.get(message) {
                Some(Message::Update { delivered, .. })
                    if delivered.len() == self.servers.len() =>
                {
                    self.mailbox.remove(message);
                    Ok(self.push_entry("E-GC", None, None, Action::eps(Label::Loc), None))
                }
                _ => Err(illegal("message is not a fully delivered update")),
            },
            StepChoice::DeliverUpdate { message, server } => {
                self.deliver(message, server).map_err(|e| match e {
                    RuntimeError::IllegalChoice(why) => illegal(&why),
                    other => other,
                })
            }
            StepChoice::ProcessReq { message, server } => {
                let Some(Message::Req { id, origin }) = self.mailbox.get(message).cloned() else {
                    return Err(illegal("message is not a request"));
                };
                let o = *self
                    .global
                    .get(&id)
                    .ok_or_else(|| illegal("identifier not published"))?;
                let v = self
                    .servers
                    .get(server)
                    .and_then(|s| s.store.get(&o))
                    .cloned()
                    .ok_or_else(|| illegal("replica does not hold the location"))?;
                let ci = self
                    .client_index(origin)
                    .ok_or_else(|| illegal("no such client"))?;
                let target = *self.clients[ci]
                    .idmap
                    .get(&id)
                    .ok_or_else(|| illegal("client lost the identifier"))?;
                self.mailbox.remove(message);
                self.clients[ci]
                    .store
                    .insert(target, v.join_label(Label::Loc));
                Ok(self.push_entry(
                    "E-PROCESS-REQUEST",
                    Some(origin),
                    Some(server),
                    Action::eps(Label::Loc),
                    None,
                ))
            }
        }
    }

    fn deliver(&mut self, message: usize, server: ServerId) -> Result<&TraceEntry, RuntimeError> {
        let Some(Message::Update {
            loc,
            id,
            value,
            origin,
            delivered,
            event,
        }) = self.mailbox.get(message).cloned()
        else {
            return Err(RuntimeError::IllegalChoice(
                "message is not an update".into(),
            ));
        };
        if server >= self.servers.len() || delivered.contains(&server) {
            return Err(RuntimeError::IllegalChoice(
                "replica already has the update".into(),
            ));
        }
        let target = match id {
            Some(id) => *self.global.entry(id).or_insert(loc),
            None => loc,
        };
        let replica = &self.servers[server];
        let merged = match replica.store.get(&target) {
            Some(old) => value_join(&value, old)?,
            None => value.clone(),
        }
        .join_label(Label::Loc);
        let before = replica.seq.clone();
        let replica = &mut self.servers[server];
        replica.store.insert(target, merged);
        replica.seq.insert(0, event);
        let mut m = self.mailbox.remove(message);
        if let Message::Update { delivered, .. } = &mut m {
            delivered.insert(server);
        }
        self.insert_message(m);
        let mut action = Action::op(
            Label::Loc,
            OpKind::Wr,
            Label::Ava,
            Label::Ava,
            event,
            loc,
            value,
        )
        .with_seq(before);
        action.delivery = true;
        action.target = Some(target);
        let _ = origin;
        Ok(self.push_entry("E-PROCESS-UPDATE", None, Some(server), action, None))
    }

    /// Writes `v` under a fresh event to every replica at once.
    pub(crate) fn atomic_install(
        &mut self,
        nu: EventId,
        writes: &[(Location, Value)],
    ) -> Vec<EventId> {
        let common = self.common_events();
        for s in &mut self.servers {
            for (o, v) in writes {
                s.store.insert(*o, v.clone());
            }
            s.seq.insert(0, nu);
        }
        common
    }

    fn step_atomic(&mut self, ci: usize, focus: &Focus) -> Result<(), RuntimeError> {
        let redex = redex_at(&self.clients[ci].term, &focus.path).clone();
        let effect = focus.effect;
        let client = self.clients[ci].id;
        let value_of = |t: &Term| t.as_value().cloned().expect("operands are values");
        let (rule, action, out, allocated, node_count) = match &redex.kind {
            TermKind::Ref(l @ (Label::Con | Label::Oac), body, id) => {
                let v = value_of(body);
                if self.global.contains_key(id) {
                    let dup = Value::Duplicated(Box::new(redex.clone()));
                    ("E-CONREF-DUP", Action::eps(effect), dup, vec![], None)
                } else {
                    let o = self.clients[ci].fresh_location(*l);
                    let nu = self.clients[ci].fresh_event();
                    let stamped = v.join_label(effect).join_label(*l);
                    let common = self.atomic_install(nu, &[(o, stamped.clone())]);
                    self.global.insert(*id, o);
                    let rule = if *l == Label::Oac {
                        self.clients[ci].store.insert(o, stamped);
                        self.clients[ci].idmap.insert(*id, o);
                        "E-OACREF"
                    } else {
                        "E-CONREF"
                    };
                    let a =
                        Action::op(effect, OpKind::Ref, *l, Label::Con, nu, o, v).with_seq(common);
                    (rule, a, Value::loc(o, *l), vec![(o, *id)], None)
                }
            }
            TermKind::Assign(r, v) => {
                let (o, hl) = location_operand(r)?;
                if o.kind != Label::Con {
                    return Err(RuntimeError::IllegalChoice(
                        "assignment is not consistent".into(),
                    ));
                }
                let v = value_of(v);
                let nu = self.clients[ci].fresh_event();
                let stamped = v.join_label(effect).join_label(Label::Con);
                let common = self.atomic_install(nu, &[(o, stamped)]);
                let a = Action::op(effect, OpKind::Wr, Label::Con, Label::Con, nu, o, v)
                    .with_seq(common);
                (
                    "E-CONASSIGN",
                    a,
                    Value::unit(Label::Con.join(hl)),
                    vec![],
                    None,
                )
            }
            TermKind::FlexWrite(Label::Con, r, v) => {
                let (o, _) = location_operand(r)?;
                let v = value_of(v);
                let nu = self.clients[ci].fresh_event();
                let stamped = v.join_label(effect).join_label(Label::Con);
                self.clients[ci].store.insert(o, stamped.clone());
                let common = self.atomic_install(nu, &[(o, stamped.clone())]);
                let a = Action::op(effect, OpKind::Wr, Label::Con, Label::Con, nu, o, stamped)
                    .with_seq(common);
                ("E-FLEXWRT-CON", a, Value::unit(Label::Con), vec![], None)
            }
            TermKind::FlexRead(Label::Con, r) => {
                let (o, _) = location_operand(r)?;
                let mut merged: Option<Value> = None;
                for s in &self.servers {
                    if let Some(v) = s.store.get(&o) {
                        merged = Some(match merged {
                            None => v.clone(),
                            Some(m) => value_join(&m, v)?,
                        });
                    }
                }
                let merged = merged.ok_or(RuntimeError::DanglingLocation(o))?;
                for s in &mut self.servers {
                    s.store.insert(o, merged.clone());
                }
                self.clients[ci].store.insert(o, merged.clone());
                let mut seen: BTreeSet<EventId> = BTreeSet::new();
                for s in &self.servers {
                    seen.extend(s.seq.iter().copied());
                }
                let read = merged.with_label(Label::Con);
                let nu = self.clients[ci].fresh_event();
                let a = Action::op(
                    effect,
                    OpKind::Rd,
                    Label::Con,
                    Label::Con,
                    nu,
                    o,
                    read.clone(),
                )
                .with_source(Source::AllServers, seen.into_iter().collect());
                ("E-FLEXRD-CON", a, read, vec![], None)
            }
            TermKind::Clone(_, r, id) => {
                let (root, _) = location_operand(r)?;
                if self.global.contains_key(id) {
                    let dup = Value::Duplicated(Box::new(redex.clone()));
                    ("E-CLONE-DUP", Action::eps(effect), dup, vec![], None)
                } else {
                    let done = clone::clone_step(self, client, root, *id, effect)?;
                    (
                        "E-CLONE",
                        done.action,
                        done.root,
                        vec![],
                        Some(done.node_count),
                    )
                }
            }
            _ => {
                return Err(RuntimeError::IllegalChoice(
                    "redex needs a different choice".into(),
                ))
            }
        };
        let step = LocalStep {
            rule,
            action,
            result: Some(out.clone()),
            allocated,
        };
        self.finish_client_step(ci, focus, step, out, None);
        if let Some(n) = node_count {
            self.trace.last_mut().expect("step recorded").node_count = Some(n);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeValue;

    fn config(src: &str) -> CloudConfig {
        CloudConfig::from_source(src, None).unwrap()
    }

    fn nat(n: u64, l: Label) -> Value {
        Value::lat(LatticeValue::nat(n), l)
    }

    #[test]
    fn quiescent_config_has_no_choices() {
        let c = config("client 0 { unit@loc }");
        assert!(c.enabled().is_empty());
    }

    #[test]
    fn con_ref_is_one_atomic_step() {
        let mut c = config("client 0 { ref@con(nat 1 @con, (con,1)) }");
        let e = c
            .step(StepChoice::ClientStep { client: 0 })
            .unwrap()
            .clone();
        assert_eq!(e.rule, "E-CONREF");
        assert!(c.is_quiescent());
        assert_eq!(c.global.len(), 1);
        let nu = e.action.event.unwrap();
        for s in &c.servers {
            assert_eq!(s.seq, vec![nu]);
        }
    }

    #[test]
    fn con_assign_updates_all_servers() {
        let mut c = config("client 0 { let r = ref@con(nat 1 @con, (con,1)) in r := nat 4 @con }");
        while let Some(ch) = c.enabled().first().copied() {
            c.step(ch).unwrap();
        }
        let e = c.trace.iter().find(|e| e.rule == "E-CONASSIGN").unwrap();
        let nu = e.action.event.unwrap();
        for s in &c.servers {
            assert_eq!(s.seq[0], nu);
            assert_eq!(s.store.values().next().unwrap(), &nat(4, Label::Con));
        }
    }

    #[test]
    fn update_delivery_choices_and_gc() {
        let mut c = config("client 0 { ref@ava(nat 2 @loc, (ava,1)) }");
        c.step(StepChoice::ClientStep { client: 0 }).unwrap();
        c.step(StepChoice::Send { client: 0 }).unwrap();
        c.step(StepChoice::DeliverUpdate {
            message: 0,
            server: 1,
        })
        .unwrap();
        assert_eq!(
            c.enabled(),
            vec![
                StepChoice::DeliverUpdate {
                    message: 0,
                    server: 0
                },
                StepChoice::DeliverUpdate {
                    message: 0,
                    server: 2
                }
            ]
        );
        c.step(StepChoice::DeliverUpdate {
            message: 0,
            server: 0,
        })
        .unwrap();
        c.step(StepChoice::DeliverUpdate {
            message: 0,
            server: 2,
        })
        .unwrap();
        assert_eq!(c.enabled(), vec![StepChoice::GcUpdate { message: 0 }]);
        let before = c.servers.clone();
        c.step(StepChoice::GcUpdate { message: 0 }).unwrap();
        assert!(c.mailbox.is_empty());
        assert_eq!(c.servers, before);
    }

    #[test]
    fn delivery_joins_with_replica_state() {
        let mut c = config("client 0 { let r = ref@ava(nat 7 @loc, (ava,1)) in r := nat 2 @loc }");
        for _ in 0..3 {
            c.step(StepChoice::ClientStep { client: 0 }).unwrap();
        }
        c.step(StepChoice::Send { client: 0 }).unwrap();
        c.step(StepChoice::Send { client: 0 }).unwrap();
        // deliver the 7 first, then the 2
        let first = c
            .mailbox
            .iter()
            .position(|m| matches!(m, Message::Update { value, .. } if value.as_lattice().unwrap().0 == &LatticeValue::nat(7)))
            .unwrap();
        c.step(StepChoice::DeliverUpdate {
            message: first,
            server: 0,
        })
        .unwrap();
        let second = c
            .mailbox
            .iter()
            .position(|m| matches!(m, Message::Update { delivered, .. } if delivered.is_empty()))
            .unwrap();
        c.step(StepChoice::DeliverUpdate {
            message: second,
            server: 0,
        })
        .unwrap();
        let v = c.servers[0].store.values().next().unwrap();
        assert_eq!(v.as_lattice().unwrap().0, &LatticeValue::nat(7));
    }

    #[test]
    fn con_deref_offers_every_replica() {
        let mut c = config("client 0 { !ref@con(nat 1 @con, (con,1)) }");
        c.step(StepChoice::ClientStep { client: 0 }).unwrap();
        assert_eq!(
            c.enabled(),
            (0..3)
                .map(|server| StepChoice::ConRead { client: 0, server })
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn await_blocks_until_published() {
        let mut c =
            config("client 0 { !await((con,1)) } client 1 { ref@con(nat 3 @con, (con,1)) }");
        assert_eq!(
            c.client_status(0),
            ClientStatus::Blocked(Identifier::new(Label::Con, 1))
        );
        assert_eq!(c.enabled(), vec![StepChoice::ClientStep { client: 1 }]);
        c.step(StepChoice::ClientStep { client: 1 }).unwrap();
        assert_eq!(c.enabled()[0], StepChoice::AwaitResolve { client: 0 });
    }

    #[test]
    fn fingerprint_ignores_trace() {
        let mut a = config("client 0 { unit@loc }");
        let b = a.clone();
        a.trace.push(TraceEntry {
            step: 0,
            rule: "E-SEND",
            client: None,
            server: None,
            action: Action::eps(Label::Loc),
            result: None,
            node_count: None,
        });
        assert_eq!(a.fingerprint(), b.fingerprint());
    }
}
