use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use super::label::Label;
use super::types::Type;
use crate::lattice::LatticeValue;

/// Source position. Spans never take part in equality, ordering or hashing,
/// so terms that differ only in where they were parsed compare equal.
#[derive(Clone, Copy, Debug, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }

    pub fn is_known(&self) -> bool {
        self.line > 0
    }
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

impl PartialOrd for Span {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Span {
    fn cmp(&self, _: &Self) -> Ordering {
        Ordering::Equal
    }
}

impl Hash for Span {
    fn hash<H: Hasher>(&self, _: &mut H) {}
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

pub type ClientId = u32;

/// `(label, n)` names a reference so that other clients can find it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Identifier {
    pub label: Label,
    pub index: u64,
}

impl Identifier {
    pub fn new(label: Label, index: u64) -> Self {
        Identifier { label, index }
    }
}

impl fmt::Display for Identifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.label, self.index)
    }
}

/// A runtime location `(client, serial)`. `kind` is the label of the
/// reference that allocated it (`loc` for client-local cells); serials are
/// drawn from a per-client, per-kind counter and never reused.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Location {
    pub kind: Label,
    pub client: ClientId,
    pub serial: u64,
}

impl Location {
    pub fn new(kind: Label, client: ClientId, serial: u64) -> Self {
        Location {
            kind,
            client,
            serial,
        }
    }

    pub fn is_local(&self) -> bool {
        self.kind == Label::Loc
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}:{}.{}", self.kind, self.client, self.serial)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LatOp {
    Join,
    Meet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RelOp {
    Leq,
    Lt,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Abstraction {
    pub latent: Label,
    pub param: String,
    pub param_ty: Type,
    pub body: Term,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RawValue {
    Lat(LatticeValue),
    Bool(bool),
    Unit,
    Abs(Box<Abstraction>),
    Loc(Location),
    Record(Vec<(String, Value)>),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Plain {
        raw: RawValue,
        label: Label,
    },
    /// Produced when a reference is created under an identifier that is
    /// already bound. The inner term is the `ref`/`clone` that was refused.
    Duplicated(Box<Term>),
}

impl Value {
    pub fn plain(raw: RawValue, label: Label) -> Self {
        Value::Plain { raw, label }
    }

    pub fn lat(d: LatticeValue, label: Label) -> Self {
        Value::plain(RawValue::Lat(d), label)
    }

    pub fn boolean(b: bool, label: Label) -> Self {
        Value::plain(RawValue::Bool(b), label)
    }

    pub fn unit(label: Label) -> Self {
        Value::plain(RawValue::Unit, label)
    }

    pub fn loc(o: Location, label: Label) -> Self {
        Value::plain(RawValue::Loc(o), label)
    }

    pub fn label(&self) -> Option<Label> {
        match self {
            Value::Plain { label, .. } => Some(*label),
            Value::Duplicated(_) => None,
        }
    }

    pub fn raw(&self) -> Option<&RawValue> {
        match self {
            Value::Plain { raw, .. } => Some(raw),
            Value::Duplicated(_) => None,
        }
    }

    pub fn as_location(&self) -> Option<(Location, Label)> {
        match self {
            Value::Plain {
                raw: RawValue::Loc(o),
                label,
            } => Some((*o, *label)),
            _ => None,
        }
    }

    pub fn as_lattice(&self) -> Option<(&LatticeValue, Label)> {
        match self {
            Value::Plain {
                raw: RawValue::Lat(d),
                label,
            } => Some((d, *label)),
            _ => None,
        }
    }

    /// `v ∨ ℓ`: joins the outer label; duplicated markers are left alone.
    pub fn join_label(&self, l: Label) -> Value {
        match self {
            Value::Plain { raw, label } => Value::Plain {
                raw: raw.clone(),
                label: label.join(l),
            },
            Value::Duplicated(_) => self.clone(),
        }
    }

    pub fn with_label(&self, l: Label) -> Value {
        match self {
            Value::Plain { raw, .. } => Value::Plain {
                raw: raw.clone(),
                label: l,
            },
            Value::Duplicated(_) => self.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TermKind {
    Var(String),
    Value(Value),
    /// `t[ℓ]`. The runtime also uses it as the effect frame around a
    /// function body or a chosen `if` branch.
    Restrict(Box<Term>, Label),
    LatOp(LatOp, Box<Term>, Box<Term>),
    Rel(RelOp, Box<Term>, Box<Term>),
    App(Box<Term>, Box<Term>),
    If(Box<Term>, Box<Term>, Box<Term>),
    Let(String, Box<Term>, Box<Term>),
    Ref(Label, Box<Term>, Identifier),
    Await(Identifier),
    Deref(Box<Term>),
    Assign(Box<Term>, Box<Term>),
    FlexRead(Label, Box<Term>),
    FlexWrite(Label, Box<Term>, Box<Term>),
    Record(Vec<(String, Term)>, Label),
    Proj(Box<Term>, String),
    Clone(Label, Box<Term>, Identifier),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Term {
    pub kind: TermKind,
    pub span: Span,
}

impl From<TermKind> for Term {
    fn from(kind: TermKind) -> Self {
        Term {
            kind,
            span: Span::default(),
        }
    }
}

impl From<Value> for Term {
    fn from(v: Value) -> Self {
        TermKind::Value(v).into()
    }
}

impl Term {
    pub fn new(kind: TermKind, span: Span) -> Self {
        Term { kind, span }
    }

    pub fn as_value(&self) -> Option<&Value> {
        match &self.kind {
            TermKind::Value(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_value(&self) -> bool {
        matches!(self.kind, TermKind::Value(_))
    }

    /// Immediate subterms in evaluation order.
    pub fn children(&self) -> Vec<&Term> {
        use TermKind::*;
        match &self.kind {
            Var(_) | Value(_) | Await(_) => vec![],
            Restrict(t, _)
            | Deref(t)
            | FlexRead(_, t)
            | Proj(t, _)
            | Ref(_, t, _)
            | Clone(_, t, _) => vec![t],
            LatOp(_, a, b)
            | Rel(_, a, b)
            | App(a, b)
            | Assign(a, b)
            | FlexWrite(_, a, b)
            | Let(_, a, b) => {
                vec![a, b]
            }
            If(g, t, e) => vec![g, t, e],
            Record(fields, _) => fields.iter().map(|(_, t)| t).collect(),
        }
    }

    pub fn child_mut(&mut self, index: usize) -> Option<&mut Term> {
        use TermKind::*;
        match (&mut self.kind, index) {
            (
                Restrict(t, _)
                | Deref(t)
                | FlexRead(_, t)
                | Proj(t, _)
                | Ref(_, t, _)
                | Clone(_, t, _),
                0,
            ) => Some(t),
            (
                LatOp(_, a, _)
                | Rel(_, a, _)
                | App(a, _)
                | Assign(a, _)
                | FlexWrite(_, a, _)
                | Let(_, a, _),
                0,
            ) => Some(a),
            (
                LatOp(_, _, b)
                | Rel(_, _, b)
                | App(_, b)
                | Assign(_, b)
                | FlexWrite(_, _, b)
                | Let(_, _, b),
                1,
            ) => Some(b),
            (If(g, _, _), 0) => Some(g),
            (If(_, t, _), 1) => Some(t),
            (If(_, _, e), 2) => Some(e),
            (Record(fields, _), i) => fields.get_mut(i).map(|(_, t)| t),
            _ => None,
        }
    }

    /// Capture-free substitution of a closed value for `x`.
    pub fn subst(&self, x: &str, v: &Value) -> Term {
        use TermKind::*;
        let kind = match &self.kind {
            Var(y) if y == x => Value(v.clone()),
            Var(_) | Await(_) => self.kind.clone(),
            Value(w) => Value(subst_value(w, x, v)),
            Restrict(t, l) => Restrict(Box::new(t.subst(x, v)), *l),
            LatOp(op, a, b) => LatOp(*op, Box::new(a.subst(x, v)), Box::new(b.subst(x, v))),
            Rel(op, a, b) => Rel(*op, Box::new(a.subst(x, v)), Box::new(b.subst(x, v))),
            App(a, b) => App(Box::new(a.subst(x, v)), Box::new(b.subst(x, v))),
            If(g, t, e) => If(
                Box::new(g.subst(x, v)),
                Box::new(t.subst(x, v)),
                Box::new(e.subst(x, v)),
            ),
            Let(y, a, b) => {
                let body = if y == x { (**b).clone() } else { b.subst(x, v) };
                Let(y.clone(), Box::new(a.subst(x, v)), Box::new(body))
            }
            Ref(l, t, id) => Ref(*l, Box::new(t.subst(x, v)), *id),
            Deref(t) => Deref(Box::new(t.subst(x, v))),
            Assign(a, b) => Assign(Box::new(a.subst(x, v)), Box::new(b.subst(x, v))),
            FlexRead(l, t) => FlexRead(*l, Box::new(t.subst(x, v))),
            FlexWrite(l, a, b) => FlexWrite(*l, Box::new(a.subst(x, v)), Box::new(b.subst(x, v))),
            Record(fields, l) => Record(
                fields
                    .iter()
                    .map(|(n, t)| (n.clone(), t.subst(x, v)))
                    .collect(),
                *l,
            ),
            Proj(t, f) => Proj(Box::new(t.subst(x, v)), f.clone()),
            Clone(l, t, id) => Clone(*l, Box::new(t.subst(x, v)), *id),
        };
        Term {
            kind,
            span: self.span,
        }
    }

    /// Rewrites every location occurring in the term (inside values too).
    pub fn map_locations(&self, f: &mut dyn FnMut(Location, Label) -> (Location, Label)) -> Term {
        use TermKind::*;
        let kind = match &self.kind {
            Var(_) | Await(_) => self.kind.clone(),
            Value(w) => Value(w.map_locations(f)),
            Restrict(t, l) => Restrict(Box::new(t.map_locations(f)), *l),
            LatOp(op, a, b) => LatOp(
                *op,
                Box::new(a.map_locations(f)),
                Box::new(b.map_locations(f)),
            ),
            Rel(op, a, b) => Rel(
                *op,
                Box::new(a.map_locations(f)),
                Box::new(b.map_locations(f)),
            ),
            App(a, b) => App(Box::new(a.map_locations(f)), Box::new(b.map_locations(f))),
            If(g, t, e) => If(
                Box::new(g.map_locations(f)),
                Box::new(t.map_locations(f)),
                Box::new(e.map_locations(f)),
            ),
            Let(y, a, b) => Let(
                y.clone(),
                Box::new(a.map_locations(f)),
                Box::new(b.map_locations(f)),
            ),
            Ref(l, t, id) => Ref(*l, Box::new(t.map_locations(f)), *id),
            Deref(t) => Deref(Box::new(t.map_locations(f))),
            Assign(a, b) => Assign(Box::new(a.map_locations(f)), Box::new(b.map_locations(f))),
            FlexRead(l, t) => FlexRead(*l, Box::new(t.map_locations(f))),
            FlexWrite(l, a, b) => FlexWrite(
                *l,
                Box::new(a.map_locations(f)),
                Box::new(b.map_locations(f)),
            ),
            Record(fields, l) => Record(
                fields
                    .iter()
                    .map(|(n, t)| (n.clone(), t.map_locations(f)))
                    .collect(),
                *l,
            ),
            Proj(t, name) => Proj(Box::new(t.map_locations(f)), name.clone()),
            Clone(l, t, id) => Clone(*l, Box::new(t.map_locations(f)), *id),
        };
        Term {
            kind,
            span: self.span,
        }
    }
}

fn subst_value(w: &Value, x: &str, v: &Value) -> Value {
    match w {
        Value::Plain { raw, label } => {
            let raw = match raw {
                RawValue::Abs(abs) if abs.param != x => RawValue::Abs(Box::new(Abstraction {
                    latent: abs.latent,
                    param: abs.param.clone(),
                    param_ty: abs.param_ty.clone(),
                    body: abs.body.subst(x, v),
                })),
                RawValue::Record(fields) => RawValue::Record(
                    fields
                        .iter()
                        .map(|(n, f)| (n.clone(), subst_value(f, x, v)))
                        .collect(),
                ),
                other => other.clone(),
            };
            Value::Plain { raw, label: *label }
        }
        Value::Duplicated(t) => Value::Duplicated(Box::new(t.subst(x, v))),
    }
}

impl Value {
    pub fn map_locations(&self, f: &mut dyn FnMut(Location, Label) -> (Location, Label)) -> Value {
        match self {
            Value::Plain {
                raw: RawValue::Loc(o),
                label,
            } => {
                let (o2, l2) = f(*o, *label);
                Value::loc(o2, l2)
            }
            Value::Plain { raw, label } => {
                let raw = match raw {
                    RawValue::Abs(abs) => RawValue::Abs(Box::new(Abstraction {
                        latent: abs.latent,
                        param: abs.param.clone(),
                        param_ty: abs.param_ty.clone(),
                        body: abs.body.map_locations(f),
                    })),
                    RawValue::Record(fields) => RawValue::Record(
                        fields
                            .iter()
                            .map(|(n, v)| (n.clone(), v.map_locations(f)))
                            .collect(),
                    ),
                    other => other.clone(),
                };
                Value::Plain { raw, label: *label }
            }
            Value::Duplicated(t) => Value::Duplicated(Box::new(t.map_locations(f))),
        }
    }
}

/// Locations occurring syntactically in `t`, including inside values,
/// records and abstraction bodies.
pub fn refs(t: &Term) -> BTreeSet<Location> {
    let mut out = BTreeSet::new();
    collect_term(t, &mut out);
    out
}

pub fn value_refs(v: &Value) -> BTreeSet<Location> {
    let mut out = BTreeSet::new();
    collect_value(v, &mut out);
    out
}

fn collect_term(t: &Term, out: &mut BTreeSet<Location>) {
    if let TermKind::Value(v) = &t.kind {
        collect_value(v, out);
    }
    for c in t.children() {
        collect_term(c, out);
    }
}

fn collect_value(v: &Value, out: &mut BTreeSet<Location>) {
    match v {
        Value::Plain { raw, .. } => match raw {
            RawValue::Loc(o) => {
                out.insert(*o);
            }
            RawValue::Abs(abs) => collect_term(&abs.body, out),
            RawValue::Record(fields) => fields.iter().for_each(|(_, f)| collect_value(f, out)),
            RawValue::Lat(_) | RawValue::Bool(_) | RawValue::Unit => {}
        },
        Value::Duplicated(t) => collect_term(t, out),
    }
}

/// A whole program: the replica count and one term per client.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub servers: usize,
    pub clients: Vec<ClientDecl>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClientDecl {
    pub id: ClientId,
    pub body: Term,
    pub span: Span,
}

pub const DEFAULT_SERVERS: usize = 3;
