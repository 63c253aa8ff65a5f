//! Client-local reduction: evaluation contexts, pure redexes and the rules
//! that only touch one client's store, buffer and identifier map.

use std::collections::BTreeMap;

use super::trace::{Action, OpKind, Source};
use super::{value_join, ClientState, Message, RuntimeError};
use crate::lattice::LatticeValue;
use crate::syntax::ast::*;
use crate::syntax::label::Label;

/// Position of the redex inside a term and the current effect `ℓ_c` there
/// (join of all enclosing restriction frames).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Focus {
    pub path: Vec<usize>,
    pub effect: Label,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Decomposition {
    Value,
    Redex(Focus),
    Stuck(String),
}

/// How many leading children are evaluated before the node itself reduces.
fn evaluated_children(t: &Term) -> usize {
    match &t.kind {
        TermKind::If(..) | TermKind::Let(..) => 1,
        _ => t.children().len(),
    }
}

pub fn decompose(t: &Term) -> Decomposition {
    if t.is_value() {
        return Decomposition::Value;
    }
    let mut path = Vec::new();
    let mut effect = Label::Loc;
    let mut cur = t;
    loop {
        if let TermKind::Var(x) = &cur.kind {
            return Decomposition::Stuck(format!("free variable `{x}`"));
        }
        let children = cur.children();
        let next = children
            .iter()
            .take(evaluated_children(cur))
            .position(|c| !c.is_value());
        match next {
            None => return Decomposition::Redex(Focus { path, effect }),
            Some(i) => {
                if let TermKind::Restrict(_, l) = &cur.kind {
                    effect = effect.join(*l);
                }
                path.push(i);
                cur = children[i];
            }
        }
    }
}

pub fn redex_at<'a>(t: &'a Term, path: &[usize]) -> &'a Term {
    path.iter().fold(t, |cur, i| cur.children()[*i])
}

pub fn redex_at_mut<'a>(t: &'a mut Term, path: &[usize]) -> &'a mut Term {
    let mut cur = t;
    for i in path {
        cur = cur.child_mut(*i).expect("focus path is valid");
    }
    cur
}

/// `E[t] ↦ E[new]`, keeping the redex's source position.
pub fn plug(t: &mut Term, focus: &Focus, new: Term) {
    let slot = redex_at_mut(t, &focus.path);
    let span = slot.span;
    *slot = Term {
        kind: new.kind,
        span,
    };
}

fn value_of(t: &Term) -> &Value {
    t.as_value().expect("redex operands are values")
}

fn duplicated(t: &Term) -> Option<RuntimeError> {
    match t.as_value() {
        Some(Value::Duplicated(inner)) => Some(RuntimeError::DuplicatedIdentifier(format!(
            "the reference created by {inner} was refused"
        ))),
        _ => None,
    }
}

/// The location operand of a reference operation.
pub fn location_operand(t: &Term) -> Result<(Location, Label), RuntimeError> {
    if let Some(e) = duplicated(t) {
        return Err(e);
    }
    value_of(t)
        .as_location()
        .ok_or_else(|| RuntimeError::Stuck(format!("expected a location, found {t}")))
}

/// Pure redexes: no store, buffer or identifier map involved.
pub fn reduce_pure(redex: &Term) -> Option<Result<(Term, &'static str), RuntimeError>> {
    use TermKind::{App, If, LatOp, Let, Proj, Record, Rel, Restrict};
    let out = match &redex.kind {
        Restrict(v, l) => Ok((value_of(v).join_label(*l).into(), "E-RESTRICT")),
        LatOp(op, a, b) => lattice_pair(a, b).and_then(|(x, lx, y, ly)| {
            let d = match op {
                crate::syntax::ast::LatOp::Join => x.join(y)?,
                crate::syntax::ast::LatOp::Meet => x.meet(y)?,
            };
            Ok((Value::lat(d, lx.join(ly)).into(), "E-LATOP"))
        }),
        Rel(op, a, b) => lattice_pair(a, b).and_then(|(x, lx, y, ly)| {
            let b = match op {
                RelOp::Leq => x.leq(y)?,
                RelOp::Lt => x.lt(y)?,
            };
            Ok((Value::boolean(b, lx.join(ly)).into(), "E-RELOP"))
        }),
        App(f, a) => match value_of(f) {
            Value::Plain {
                raw: RawValue::Abs(abs),
                label,
            } => Ok((
                Restrict(Box::new(abs.body.subst(&abs.param, value_of(a))), *label).into(),
                "E-APP",
            )),
            other => Err(RuntimeError::Stuck(format!("cannot apply {other}"))),
        },
        If(g, th, el) => match value_of(g) {
            Value::Plain {
                raw: RawValue::Bool(b),
                label,
            } => {
                let branch = if *b { th } else { el };
                Ok((Restrict(branch.clone(), *label).into(), "E-IF"))
            }
            other => Err(RuntimeError::Stuck(format!(
                "condition {other} is not a boolean"
            ))),
        },
        Let(x, v, body) => Ok((body.subst(x, value_of(v)), "E-LET")),
        Record(fields, l) => Ok((
            Value::plain(
                RawValue::Record(
                    fields
                        .iter()
                        .map(|(n, t)| (n.clone(), value_of(t).clone()))
                        .collect(),
                ),
                *l,
            )
            .into(),
            "E-RECORD",
        )),
        Proj(r, field) => match value_of(r) {
            Value::Plain {
                raw: RawValue::Record(fields),
                label,
            } => match fields.iter().find(|(n, _)| n == field) {
                Some((_, v)) => Ok((v.join_label(*label).into(), "E-PROJ")),
                None => Err(RuntimeError::Stuck(format!("no field `{field}`"))),
            },
            other => Err(RuntimeError::Stuck(format!("projection from {other}"))),
        },
        _ => return None,
    };
    Some(out)
}

fn lattice_pair<'a>(
    a: &'a Term,
    b: &'a Term,
) -> Result<(&'a LatticeValue, Label, &'a LatticeValue, Label), RuntimeError> {
    let (x, lx) = value_of(a)
        .as_lattice()
        .ok_or_else(|| RuntimeError::Stuck(format!("{a} is not a lattice value")))?;
    let (y, ly) = value_of(b)
        .as_lattice()
        .ok_or_else(|| RuntimeError::Stuck(format!("{b} is not a lattice value")))?;
    Ok((x, lx, y, ly))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalStep {
    pub rule: &'static str,
    pub action: Action,
    /// Value the redex reduced to, when it reduced to a value.
    pub result: Option<Value>,
    /// Locations allocated for an identifier during the step.
    pub allocated: Vec<(Location, Identifier)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LocalOutcome {
    Stepped(LocalStep),
    Done,
    /// Waiting at `await(id)` for an identifier nobody has published yet.
    Blocked(Identifier),
    /// The redex needs the replicas or the global identifier map.
    NonLocal(Focus),
    Fault(RuntimeError),
}

/// One step of `c` if a client-local rule applies. `global` is the
/// identifier map Λ, read only.
pub fn step_local(c: &mut ClientState, global: &BTreeMap<Identifier, Location>) -> LocalOutcome {
    if c.fault.is_some() {
        return LocalOutcome::Done;
    }
    let focus = match decompose(&c.term) {
        Decomposition::Value => return LocalOutcome::Done,
        Decomposition::Stuck(msg) => return LocalOutcome::Fault(RuntimeError::Stuck(msg)),
        Decomposition::Redex(f) => f,
    };
    let redex = redex_at(&c.term, &focus.path).clone();
    let effect = focus.effect;

    if let Some(r) = reduce_pure(&redex) {
        return match r {
            Ok((new, rule)) => {
                let result = new.as_value().cloned();
                plug(&mut c.term, &focus, new);
                LocalOutcome::Stepped(LocalStep {
                    rule,
                    action: Action::eps(effect),
                    result,
                    allocated: vec![],
                })
            }
            Err(e) => LocalOutcome::Fault(e),
        };
    }

    let outcome = match &redex.kind {
        TermKind::Ref(l @ (Label::Loc | Label::Ava), body, id) => {
            let v = value_of(body).clone();
            if c.idmap.contains_key(id) {
                let dup = Value::Duplicated(Box::new(redex.clone()));
                Ok(done("E-REF-DUP", Action::eps(effect), dup, vec![]))
            } else if *l == Label::Loc {
                let o = c.fresh_location(Label::Loc);
                c.store.insert(o, v.join_label(effect));
                c.idmap.insert(*id, o);
                Ok(done(
                    "E-LOCALREF",
                    Action::eps(effect),
                    Value::loc(o, Label::Loc),
                    vec![(o, *id)],
                ))
            } else {
                let o = c.fresh_location(Label::Ava);
                let nu = c.fresh_event();
                c.store
                    .insert(o, v.join_label(effect).join_label(Label::Ava));
                c.idmap.insert(*id, o);
                c.buffer.push(update(o, Some(*id), v.clone(), c.id, nu));
                let a = Action::op(effect, OpKind::Ref, Label::Ava, Label::Ava, nu, o, v);
                Ok(done(
                    "E-AVAREF",
                    a,
                    Value::loc(o, Label::Ava),
                    vec![(o, *id)],
                ))
            }
        }
        TermKind::Deref(r) => match location_operand(r) {
            Err(e) => Err(e),
            Ok((o, hl)) => match o.kind {
                Label::Loc => match c.store.get(&o) {
                    Some(v) => Ok(done(
                        "E-DEREF",
                        Action::eps(effect),
                        v.join_label(hl),
                        vec![],
                    )),
                    None => Err(RuntimeError::DanglingLocation(o)),
                },
                Label::Ava | Label::Oac => match c.store.get(&o).cloned() {
                    Some(v) => {
                        let nu = c.fresh_event();
                        if let Some(id) = c.getkey(o) {
                            c.buffer.push(Message::Req { id, origin: c.id });
                        }
                        let a = Action::op(
                            effect,
                            OpKind::Rd,
                            Label::Ava,
                            Label::Ava,
                            nu,
                            o,
                            v.clone(),
                        )
                        .with_source(Source::Local, vec![]);
                        let out = v.join_label(Label::Ava).join_label(hl);
                        Ok(done("E-AVADEREF1", a, out, vec![]))
                    }
                    None => return LocalOutcome::NonLocal(focus),
                },
                Label::Con => return LocalOutcome::NonLocal(focus),
            },
        },
        TermKind::Assign(r, v) => match location_operand(r) {
            Err(e) => Err(e),
            Ok((o, hl)) => {
                let v = value_of(v).clone();
                match o.kind {
                    Label::Loc => {
                        if let Some(cell) = c.store.get_mut(&o) {
                            *cell = v.join_label(effect);
                            Ok(done(
                                "E-ASSIGN",
                                Action::eps(effect),
                                Value::unit(hl),
                                vec![],
                            ))
                        } else {
                            Err(RuntimeError::DanglingLocation(o))
                        }
                    }
                    Label::Ava | Label::Oac => {
                        let merged = match c.store.get(&o) {
                            Some(old) => value_join(old, &v).map(|m| (m, c.getkey(o))),
                            None => Ok((v.clone(), None)),
                        };
                        match merged {
                            Err(e) => Err(e),
                            Ok((merged, id)) => {
                                let nu = c.fresh_event();
                                c.store
                                    .insert(o, merged.join_label(effect).join_label(o.kind));
                                c.buffer.push(update(o, id, v.clone(), c.id, nu));
                                let a = Action::op(
                                    effect,
                                    OpKind::Wr,
                                    Label::Ava,
                                    Label::Ava,
                                    nu,
                                    o,
                                    v,
                                );
                                Ok(done(
                                    "E-AVAASSIGN",
                                    a,
                                    Value::unit(Label::Ava.join(hl)),
                                    vec![],
                                ))
                            }
                        }
                    }
                    Label::Con => return LocalOutcome::NonLocal(focus),
                }
            }
        },
        TermKind::Await(id) => match c.idmap.get(id) {
            Some(o) => Ok(done(
                "E-AWAIT1",
                Action::eps(effect),
                Value::loc(*o, id.label),
                vec![],
            )),
            None if global.contains_key(id) => return LocalOutcome::NonLocal(focus),
            None => return LocalOutcome::Blocked(*id),
        },
        TermKind::FlexRead(Label::Ava, r) => match location_operand(r) {
            Err(e) => Err(e),
            Ok((o, _)) => match c.store.get(&o).cloned() {
                Some(v) => {
                    let nu = c.fresh_event();
                    let read = v.with_label(Label::Ava);
                    let a = Action::op(
                        effect,
                        OpKind::Rd,
                        Label::Ava,
                        Label::Ava,
                        nu,
                        o,
                        read.clone(),
                    )
                    .with_source(Source::Local, vec![]);
                    Ok(done("E-FLEXRD-AVA", a, read, vec![]))
                }
                None => return LocalOutcome::NonLocal(focus),
            },
        },
        TermKind::FlexWrite(Label::Ava, r, v) => match location_operand(r) {
            Err(e) => Err(e),
            Ok((o, _)) => {
                let v = value_of(v).clone();
                let merged = match c.store.get(&o) {
                    Some(w) => value_join(w, &v),
                    None => Ok(v.clone()),
                };
                match merged {
                    Err(e) => Err(e),
                    Ok(m) => {
                        // Stamped with the location's own kind so the cell
                        // keeps its store type; reads relabel anyway.
                        let stamped = m.join_label(effect).join_label(o.kind.join(Label::Oac));
                        let nu = c.fresh_event();
                        c.store.insert(o, stamped.clone());
                        let id = c.getkey(o);
                        c.buffer.push(update(o, id, v, c.id, nu));
                        // The rule's action literal reads wr_con; the event
                        // still belongs to the available history.
                        let a =
                            Action::op(effect, OpKind::Wr, Label::Con, Label::Ava, nu, o, stamped);
                        Ok(done("E-FLEXWRT-AVA", a, Value::unit(Label::Ava), vec![]))
                    }
                }
            }
        },
        TermKind::Ref(..)
        | TermKind::Clone(..)
        | TermKind::FlexRead(..)
        | TermKind::FlexWrite(..) => return LocalOutcome::NonLocal(focus),
        other => Err(RuntimeError::Stuck(format!(
            "no rule for {}",
            Term::from(other.clone())
        ))),
    };
    match outcome {
        Ok((step, new)) => {
            plug(&mut c.term, &focus, new.into());
            LocalOutcome::Stepped(step)
        }
        Err(e) => LocalOutcome::Fault(e),
    }
}

fn done(
    rule: &'static str,
    action: Action,
    v: Value,
    allocated: Vec<(Location, Identifier)>,
) -> (LocalStep, Value) {
    (
        LocalStep {
            rule,
            action,
            result: Some(v.clone()),
            allocated,
        },
        v,
    )
}

pub fn update(
    o: Location,
    id: Option<Identifier>,
    v: Value,
    origin: ClientId,
    event: super::EventId,
) -> Message {
    Message::Update {
        loc: o,
        id,
        value: v,
        origin,
        delivered: Default::default(),
        event,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parser::parse;

    fn client(src: &str) -> ClientState {
        ClientState::new(0, parse(src).unwrap())
    }

    fn run_local(c: &mut ClientState) -> Vec<&'static str> {
        let mut rules = vec![];
        while let LocalOutcome::Stepped(s) = step_local(c, &BTreeMap::new()) {
            rules.push(s.rule);
        }
        rules
    }

    #[test]
    fn leftmost_innermost_redex() {
        let t = parse("(nat 1 @loc \\/ nat 2 @loc) <= nat 3 @loc").unwrap();
        match decompose(&t) {
            Decomposition::Redex(f) => {
                assert_eq!(f.path, vec![0]);
                assert!(matches!(redex_at(&t, &f.path).kind, TermKind::LatOp(..)));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(decompose(&parse("unit@con").unwrap()), Decomposition::Value);
    }

    #[test]
    fn latop_joins_values_and_labels() {
        let mut c = client("nat 1 @loc \\/ nat 2 @con");
        assert_eq!(run_local(&mut c), vec!["E-LATOP"]);
        assert_eq!(
            c.term,
            Term::from(Value::lat(LatticeValue::nat(2), Label::Con))
        );
    }

    #[test]
    fn duplicate_local_ref() {
        let mut c = client("let a = ref@loc(nat 3 @loc, (loc,1)) in ref@loc(nat 3 @loc, (loc,1))");
        assert_eq!(run_local(&mut c), vec!["E-LOCALREF", "E-LET", "E-REF-DUP"]);
        assert!(matches!(c.term.as_value(), Some(Value::Duplicated(_))));
        assert_eq!(c.store.len(), 1);
    }

    #[test]
    fn ava_assign_merges_and_buffers() {
        let mut c = client("let r = ref@ava(nat 5 @loc, (ava,1)) in r := nat 3 @loc");
        run_local(&mut c);
        let o = c.idmap[&Identifier::new(Label::Ava, 1)];
        assert_eq!(c.store[&o], Value::lat(LatticeValue::nat(5), Label::Ava));
        assert_eq!(c.buffer.len(), 2);
    }

    #[test]
    fn effect_frames_raise_current_label() {
        let t =
            parse("if true@ava then { nat 1 @loc \\/ nat 1 @loc } else { nat 2 @loc }").unwrap();
        let mut c = ClientState::new(0, t);
        step_local(&mut c, &BTreeMap::new());
        match decompose(&c.term) {
            Decomposition::Redex(f) => assert_eq!(f.effect, Label::Ava),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn deref_of_duplicated_is_an_error() {
        let mut c = client("let a = ref@loc(nat 3 @loc, (loc,1)) in !ref@loc(nat 3 @loc, (loc,1))");
        run_local(&mut c);
        assert!(matches!(
            step_local(&mut c, &BTreeMap::new()),
            LocalOutcome::Fault(RuntimeError::DuplicatedIdentifier(_))
        ));
    }

    #[test]
    fn beta_reduction_wraps_body_in_frame() {
        let mut c = client("(fn@con(x: Lat@loc) => x \\/ nat 1 @loc) nat 4 @loc");
        assert_eq!(run_local(&mut c), vec!["E-APP", "E-LATOP", "E-RESTRICT"]);
        assert_eq!(
            c.term,
            Term::from(Value::lat(LatticeValue::nat(4), Label::Loc))
        );
    }

    #[test]
    fn unknown_await_blocks() {
        let mut c = client("await((con, 3))");
        assert_eq!(
            step_local(&mut c, &BTreeMap::new()),
            LocalOutcome::Blocked(Identifier::new(Label::Con, 3))
        );
    }
}
