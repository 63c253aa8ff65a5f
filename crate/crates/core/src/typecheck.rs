//! The typing judgment `Γ; Σ; Λ_T; ℓ_c ⊢ t : τ`.
//!
//! Whole programs are checked in two phases: a fixpoint over all clients
//! collects the content type of every identifier created by `ref`/`clone`
//! (this is `Λ_T`), then every client is checked against it. `loc`
//! identifiers are scoped to the client that creates them.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::syntax::ast::*;
use crate::syntax::label::Label;
use crate::syntax::types::{join_types, shape_compatible, subtype, RawKind, Type};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TypeErrorKind {
    FlowViolation,
    EffectViolation,
    OacMisuse,
    NonLatticeAva,
    EscapingLocalRef,
    IdLabelMismatch,
    Mismatch,
    Unbound,
}

impl TypeErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TypeErrorKind::FlowViolation => "FlowViolation",
            TypeErrorKind::EffectViolation => "EffectViolation",
            TypeErrorKind::OacMisuse => "OacMisuse",
            TypeErrorKind::NonLatticeAva => "NonLatticeAva",
            TypeErrorKind::EscapingLocalRef => "EscapingLocalRef",
            TypeErrorKind::IdLabelMismatch => "IdLabelMismatch",
            TypeErrorKind::Mismatch => "Mismatch",
            TypeErrorKind::Unbound => "Unbound",
        }
    }

    pub const ALL: [TypeErrorKind; 8] = [
        TypeErrorKind::FlowViolation,
        TypeErrorKind::EffectViolation,
        TypeErrorKind::OacMisuse,
        TypeErrorKind::NonLatticeAva,
        TypeErrorKind::EscapingLocalRef,
        TypeErrorKind::IdLabelMismatch,
        TypeErrorKind::Mismatch,
        TypeErrorKind::Unbound,
    ];
}

impl fmt::Display for TypeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TypeErrorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TypeErrorKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown type error kind `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{kind}: {message}")]
pub struct TypeError {
    pub kind: TypeErrorKind,
    pub span: Span,
    pub message: String,
}

impl TypeError {
    fn new(kind: TypeErrorKind, span: Span, message: impl Into<String>) -> Self {
        TypeError {
            kind,
            span,
            message: message.into(),
        }
    }
}

/// `Source` checks programs as written; `Runtime` checks configurations
/// mid-execution, where locations and `oac`-labeled values legitimately occur.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Source,
    Runtime,
}

#[derive(Clone, Debug)]
pub struct TypeEnv {
    pub vars: BTreeMap<String, Type>,
    /// Σ: content type of each allocated location.
    pub store: BTreeMap<Location, Type>,
    /// Λ_T: content type of each identifier.
    pub ids: BTreeMap<Identifier, Type>,
    pub effect: Label,
    pub mode: Mode,
}

impl Default for TypeEnv {
    fn default() -> Self {
        TypeEnv {
            vars: BTreeMap::new(),
            store: BTreeMap::new(),
            ids: BTreeMap::new(),
            effect: Label::Loc,
            mode: Mode::Source,
        }
    }
}

impl TypeEnv {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_var(mut self, x: impl Into<String>, t: Type) -> Self {
        self.vars.insert(x.into(), t);
        self
    }

    pub fn with_effect(mut self, l: Label) -> Self {
        self.effect = l;
        self
    }

    pub fn with_mode(mut self, m: Mode) -> Self {
        self.mode = m;
        self
    }

    pub fn with_ids(mut self, ids: BTreeMap<Identifier, Type>) -> Self {
        self.ids = ids;
        self
    }

    pub fn with_store(mut self, store: BTreeMap<Location, Type>) -> Self {
        self.store = store;
        self
    }
}

pub fn typecheck(env: &TypeEnv, t: &Term) -> Result<Type, TypeError> {
    Ctx::new(env, false).term(t, env.effect)
}

pub fn type_of_value(env: &TypeEnv, v: &Value) -> Result<Type, TypeError> {
    Ctx::new(env, false).value(v, Span::default(), env.effect)
}

pub fn typecheck_record(
    env: &TypeEnv,
    fields: &[(String, Term)],
    label: Label,
) -> Result<Type, TypeError> {
    let t = Term::from(TermKind::Record(fields.to_vec(), label));
    typecheck(env, &t)
}

pub fn typecheck_projection(env: &TypeEnv, t: &Term, field: &str) -> Result<Type, TypeError> {
    typecheck(
        env,
        &TermKind::Proj(Box::new(t.clone()), field.to_string()).into(),
    )
}

pub fn typecheck_clone(
    env: &TypeEnv,
    t: &Term,
    label: Label,
    id: Identifier,
) -> Result<Type, TypeError> {
    typecheck(env, &TermKind::Clone(label, Box::new(t.clone()), id).into())
}

struct Ctx<'a> {
    env: &'a TypeEnv,
    scope: Vec<(String, Type)>,
    /// Identifier types declared by `ref`/`clone` nodes met so far.
    found: BTreeMap<Identifier, Type>,
    lenient_awaits: bool,
    pending_await: bool,
}

fn err<T>(kind: TypeErrorKind, span: Span, msg: impl Into<String>) -> Result<T, TypeError> {
    Err(TypeError::new(kind, span, msg))
}

/// Error for a failed `sub ≤ sup` premise: a label problem if the shapes
/// agree, a shape problem otherwise.
fn subtype_error(sub: &Type, sup: &Type, span: Span, what: &str) -> TypeError {
    if shape_compatible(sub, sup) {
        TypeError::new(
            TypeErrorKind::FlowViolation,
            span,
            format!("{what}: {sub} does not flow into {sup}"),
        )
    } else {
        TypeError::new(
            TypeErrorKind::Mismatch,
            span,
            format!("{what}: expected {sup}, found {sub}"),
        )
    }
}

impl<'a> Ctx<'a> {
    fn new(env: &'a TypeEnv, lenient_awaits: bool) -> Self {
        Ctx {
            env,
            scope: Vec::new(),
            found: BTreeMap::new(),
            lenient_awaits,
            pending_await: false,
        }
    }

    fn lookup(&self, x: &str) -> Option<&Type> {
        self.scope
            .iter()
            .rev()
            .find(|(n, _)| n == x)
            .map(|(_, t)| t)
            .or_else(|| self.env.vars.get(x))
    }

    fn id_type(&self, id: &Identifier) -> Option<&Type> {
        self.env.ids.get(id).or_else(|| self.found.get(id))
    }

    fn with_binding<T>(&mut self, x: &str, t: Type, f: impl FnOnce(&mut Self) -> T) -> T {
        self.scope.push((x.to_string(), t));
        let r = f(self);
        self.scope.pop();
        r
    }

    fn no_oac_literal(&self, l: Label, span: Span) -> Result<(), TypeError> {
        if self.env.mode == Mode::Source && l == Label::Oac {
            return err(
                TypeErrorKind::OacMisuse,
                span,
                "oac-labeled values can only be created through ref@oac",
            );
        }
        Ok(())
    }

    fn value(&mut self, v: &Value, span: Span, effect: Label) -> Result<Type, TypeError> {
        let (raw, label) = match v {
            Value::Duplicated(t) => return self.term(t, effect),
            Value::Plain { raw, label } => (raw, *label),
        };
        match raw {
            RawValue::Lat(_) => {
                self.no_oac_literal(label, span)?;
                Ok(Type::Lat(label))
            }
            RawValue::Bool(_) => {
                self.no_oac_literal(label, span)?;
                Ok(Type::Bool(label))
            }
            RawValue::Unit => {
                self.no_oac_literal(label, span)?;
                Ok(Type::Unit(label))
            }
            RawValue::Abs(abs) => {
                self.no_oac_literal(label, span)?;
                let body_ty = self.with_binding(&abs.param, abs.param_ty.clone(), |cx| {
                    cx.term(&abs.body, abs.latent)
                })?;
                Ok(Type::arrow(
                    abs.param_ty.clone(),
                    abs.latent,
                    body_ty,
                    label,
                ))
            }
            RawValue::Loc(o) => match self.env.store.get(o) {
                Some(content) => Ok(Type::reference(label, content.clone())),
                None => err(
                    TypeErrorKind::Unbound,
                    span,
                    format!("location {o} has no store type"),
                ),
            },
            RawValue::Record(fields) => {
                self.no_oac_literal(label, span)?;
                let mut tys = Vec::with_capacity(fields.len());
                for (n, f) in fields {
                    tys.push((n.clone(), self.value(f, span, effect)?));
                }
                Ok(Type::Record(tys, label))
            }
        }
    }

    fn declare_id(&mut self, id: Identifier, content: Type, span: Span) -> Result<Type, TypeError> {
        if let Some(known) = self.env.ids.get(&id) {
            if subtype(&content, known) {
                return Ok(known.clone());
            }
            return err(
                TypeErrorKind::Mismatch,
                span,
                format!("identifier {id} holds {known}, not {content}"),
            );
        }
        if let Some(prev) = self.found.get(&id) {
            if prev != &content {
                return err(
                    TypeErrorKind::Mismatch,
                    span,
                    format!("identifier {id} is created with both {prev} and {content}"),
                );
            }
        }
        self.found.insert(id, content.clone());
        Ok(content)
    }

    fn lattice_operand(&mut self, t: &Term, effect: Label) -> Result<Label, TypeError> {
        match self.term(t, effect)? {
            Type::Lat(l) => Ok(l),
            other => err(
                TypeErrorKind::Mismatch,
                t.span,
                format!("expected a lattice value, found {other}"),
            ),
        }
    }

    fn reference(&mut self, t: &Term, effect: Label) -> Result<(Label, Type), TypeError> {
        match self.term(t, effect)? {
            Type::Ref(l, content) => Ok((l, *content)),
            other => err(
                TypeErrorKind::Mismatch,
                t.span,
                format!("expected a reference, found {other}"),
            ),
        }
    }

    fn term(&mut self, t: &Term, effect: Label) -> Result<Type, TypeError> {
        use TypeErrorKind::*;
        let span = t.span;
        match &t.kind {
            TermKind::Var(x) => match self.lookup(x) {
                Some(ty) => Ok(ty.clone()),
                None => err(Unbound, span, format!("unbound variable `{x}`")),
            },
            TermKind::Value(v) => self.value(v, span, effect),
            TermKind::Restrict(inner, l) => Ok(self.term(inner, effect.join(*l))?.join_label(*l)),
            TermKind::LatOp(_, a, b) => {
                let la = self.lattice_operand(a, effect)?;
                let lb = self.lattice_operand(b, effect)?;
                Ok(Type::Lat(la.join(lb)))
            }
            TermKind::Rel(_, a, b) => {
                let la = self.lattice_operand(a, effect)?;
                let lb = self.lattice_operand(b, effect)?;
                Ok(Type::Bool(la.join(lb)))
            }
            TermKind::App(f, a) => {
                let fty = self.term(f, effect)?;
                let aty = self.term(a, effect)?;
                let Type::Arrow {
                    param,
                    latent,
                    result,
                    label,
                } = fty
                else {
                    return err(
                        Mismatch,
                        f.span,
                        format!("expected a function, found {fty}"),
                    );
                };
                if !subtype(&aty, &param) {
                    return Err(subtype_error(&aty, &param, a.span, "argument"));
                }
                if !effect.join(label).leq(latent) {
                    return err(
                        EffectViolation,
                        span,
                        format!("calling a {label} function with latent label {latent} under effect {effect}"),
                    );
                }
                Ok(result.join_label(label))
            }
            TermKind::If(g, th, el) => {
                let l = match self.term(g, effect)? {
                    Type::Bool(l) => l,
                    other => {
                        return err(
                            Mismatch,
                            g.span,
                            format!("condition must be Bool, found {other}"),
                        )
                    }
                };
                let inner = effect.join(l);
                let t1 = self.term(th, inner)?;
                let t2 = self.term(el, inner)?;
                match join_types(&t1, &t2) {
                    Some(ty) => Ok(ty.join_label(l)),
                    None => err(
                        Mismatch,
                        span,
                        format!("branches have different types {t1} and {t2}"),
                    ),
                }
            }
            TermKind::Let(x, a, b) => {
                let aty = self.term(a, effect)?;
                self.with_binding(x, aty, |cx| cx.term(b, effect))
            }
            TermKind::Ref(l, body, id) => {
                let l = *l;
                let ty = self.term(body, effect)?;
                let tl = ty.label();
                if l != Label::Oac {
                    if !tl.leq(l) {
                        return err(
                            FlowViolation,
                            span,
                            format!("{ty} cannot be stored in a {l} reference"),
                        );
                    }
                    if !effect.leq(l) {
                        return err(
                            EffectViolation,
                            span,
                            format!("cannot create a {l} reference under effect {effect}"),
                        );
                    }
                    if l == Label::Ava && ty.raw_kind() != RawKind::Lat {
                        return err(
                            NonLatticeAva,
                            span,
                            format!("ava references must hold lattice values, found {ty}"),
                        );
                    }
                    if tl.lt(l) && (!refs(body).is_empty() || ty.contains_ref()) {
                        return err(
                            EscapingLocalRef,
                            span,
                            format!("a {l} reference cannot capture the {tl} reference in {ty}"),
                        );
                    }
                } else {
                    if !tl.lt(l) {
                        return err(
                            FlowViolation,
                            span,
                            format!("{ty} cannot be stored in an oac reference"),
                        );
                    }
                    if !effect.leq(l) {
                        return err(
                            EffectViolation,
                            span,
                            format!("cannot create an oac reference under effect {effect}"),
                        );
                    }
                    if ty.raw_kind() != RawKind::Lat {
                        return err(
                            OacMisuse,
                            span,
                            format!("oac references must hold lattice values, found {ty}"),
                        );
                    }
                }
                if id.label != l {
                    return err(
                        IdLabelMismatch,
                        span,
                        format!("identifier {id} cannot name a {l} reference"),
                    );
                }
                let content = self.declare_id(*id, ty.join_label(l), span)?;
                Ok(Type::reference(l, content))
            }
            TermKind::Await(id) => match self.id_type(id) {
                Some(content) => Ok(Type::reference(id.label, content.clone())),
                None => {
                    if self.lenient_awaits {
                        self.pending_await = true;
                    }
                    err(Unbound, span, format!("identifier {id} is never created"))
                }
            },
            TermKind::Deref(r) => {
                let (l, content) = self.reference(r, effect)?;
                if l == Label::Oac {
                    return err(OacMisuse, span, "oac references are read with flexread");
                }
                Ok(content.join_label(l))
            }
            TermKind::Assign(r, v) => {
                let (l, content) = self.reference(r, effect)?;
                let vty = self.term(v, effect)?;
                if !subtype(&vty, &content) {
                    return Err(subtype_error(&vty, &content, v.span, "assignment"));
                }
                if !effect.leq(l) {
                    return err(
                        EffectViolation,
                        span,
                        format!("cannot write a {l} reference under effect {effect}"),
                    );
                }
                if l == Label::Oac {
                    return err(OacMisuse, span, "oac references are written with flexwrite");
                }
                if vty.label() == Label::Oac {
                    return err(OacMisuse, span, "cannot assign an oac-labeled value");
                }
                if !l.leq(content.label()) {
                    return err(
                        FlowViolation,
                        span,
                        format!("writing through a {l} handle into {content} content"),
                    );
                }
                Ok(Type::Unit(l))
            }
            TermKind::FlexRead(l, r) => {
                let (rl, content) = self.reference(r, effect)?;
                if rl != Label::Oac {
                    return err(
                        OacMisuse,
                        span,
                        format!("flexread needs an oac reference, found a {rl} one"),
                    );
                }
                Ok(content.with_label(*l))
            }
            TermKind::FlexWrite(l, r, v) => {
                let (rl, content) = self.reference(r, effect)?;
                let vty = self.term(v, effect)?;
                if rl != Label::Oac {
                    return err(
                        OacMisuse,
                        span,
                        format!("flexwrite needs an oac reference, found a {rl} one"),
                    );
                }
                if !matches!(vty.label(), Label::Loc | Label::Con) {
                    return err(
                        FlowViolation,
                        v.span,
                        format!("flexwrite payload must be loc or con, found {vty}"),
                    );
                }
                if vty.raw_kind() != content.raw_kind() {
                    return err(
                        Mismatch,
                        v.span,
                        format!("flexwrite payload {vty} does not match {content}"),
                    );
                }
                if !effect.leq(*l) {
                    return err(
                        EffectViolation,
                        span,
                        format!("cannot flexwrite@{l} under effect {effect}"),
                    );
                }
                Ok(Type::Unit(*l))
            }
            TermKind::Record(fields, l) => {
                self.no_oac_literal(*l, span)?;
                let mut tys = Vec::with_capacity(fields.len());
                for (n, f) in fields {
                    tys.push((n.clone(), self.term(f, effect)?));
                }
                Ok(Type::Record(tys, *l))
            }
            TermKind::Proj(r, field) => match self.term(r, effect)? {
                Type::Record(fields, l) => match fields.iter().find(|(n, _)| n == field) {
                    Some((_, ty)) => Ok(ty.join_label(l)),
                    None => err(Unbound, span, format!("no field `{field}`")),
                },
                other => err(
                    Mismatch,
                    r.span,
                    format!("projection from non-record {other}"),
                ),
            },
            TermKind::Clone(l, r, id) => {
                let ty = self.term(r, effect)?;
                if *l != Label::Con {
                    return err(
                        OacMisuse,
                        span,
                        format!("clone@{l} is not supported, only clone@con"),
                    );
                }
                let content = match &ty {
                    Type::Ref(Label::Loc, content)
                        if content.all_labels().iter().all(|x| *x == Label::Loc) =>
                    {
                        (**content).clone()
                    }
                    _ => {
                        return err(
                            Mismatch,
                            r.span,
                            format!("clone needs a purely local reference graph, found {ty}"),
                        )
                    }
                };
                if !effect.leq(Label::Con) {
                    return err(
                        EffectViolation,
                        span,
                        format!("cannot clone under effect {effect}"),
                    );
                }
                if id.label != *l {
                    return err(
                        IdLabelMismatch,
                        span,
                        format!("identifier {id} cannot name a {l} clone"),
                    );
                }
                let content = self.declare_id(*id, content.upgrade(Label::Con), span)?;
                Ok(Type::reference(Label::Con, content))
            }
        }
    }
}

/// Static identifier typing for a whole program.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProgramTyping {
    /// Λ_T for `con`/`oac`/`ava` identifiers, shared by all clients.
    pub shared: BTreeMap<Identifier, Type>,
    /// Λ_T for `loc` identifiers, per client.
    pub local: BTreeMap<ClientId, BTreeMap<Identifier, Type>>,
    pub client_types: BTreeMap<ClientId, Type>,
}

impl ProgramTyping {
    /// The identifier typing visible to one client.
    pub fn ids_for(&self, client: ClientId) -> BTreeMap<Identifier, Type> {
        let mut ids = self.shared.clone();
        if let Some(local) = self.local.get(&client) {
            ids.extend(local.iter().map(|(k, v)| (*k, v.clone())));
        }
        ids
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("client {client}: {error}")]
pub struct ProgramTypeError {
    pub client: ClientId,
    pub error: TypeError,
}

pub fn typecheck_program(p: &Program) -> Result<ProgramTyping, ProgramTypeError> {
    let mut typing = ProgramTyping::default();
    // Each round can only add identifiers, and there are finitely many
    // ref/clone sites, so this terminates.
    loop {
        let mut changed = false;
        for c in &p.clients {
            let env = TypeEnv::new().with_ids(typing.ids_for(c.id));
            let mut cx = Ctx::new(&env, true);
            let result = cx.term(&c.body, Label::Loc);
            if let Err(e) = &result {
                if !cx.pending_await {
                    return Err(ProgramTypeError {
                        client: c.id,
                        error: e.clone(),
                    });
                }
            }
            for (id, ty) in cx.found {
                let table = if id.label == Label::Loc {
                    typing.local.entry(c.id).or_default()
                } else {
                    &mut typing.shared
                };
                match table.get(&id) {
                    Some(prev) if prev != &ty => {
                        return Err(ProgramTypeError {
                            client: c.id,
                            error: TypeError::new(
                                TypeErrorKind::Mismatch,
                                c.span,
                                format!("identifier {id} is created with both {prev} and {ty}"),
                            ),
                        })
                    }
                    Some(_) => {}
                    None => {
                        table.insert(id, ty);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    for c in &p.clients {
        let env = TypeEnv::new().with_ids(typing.ids_for(c.id));
        let ty = typecheck(&env, &c.body).map_err(|error| ProgramTypeError {
            client: c.id,
            error,
        })?;
        typing.client_types.insert(c.id, ty);
    }
    Ok(typing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parser::{parse, parse_program};
    use Label::*;

    fn check(src: &str) -> Result<Type, TypeError> {
        typecheck(&TypeEnv::new(), &parse(src).unwrap())
    }

    fn kind(src: &str) -> TypeErrorKind {
        check(src).unwrap_err().kind
    }

    fn runtime_env() -> TypeEnv {
        let mut store = BTreeMap::new();
        store.insert(Location::new(Con, 0, 0), Type::Lat(Con));
        store.insert(Location::new(Ava, 0, 0), Type::Lat(Ava));
        TypeEnv::new().with_mode(Mode::Runtime).with_store(store)
    }

    fn con_loc() -> Term {
        Value::loc(Location::new(Con, 0, 0), Con).into()
    }

    fn ava_loc() -> Term {
        Value::loc(Location::new(Ava, 0, 0), Ava).into()
    }

    fn nat(n: u64, l: Label) -> Term {
        Value::lat(crate::LatticeValue::nat(n), l).into()
    }

    #[test]
    fn con_write_under_ava_effect() {
        let t: Term = TermKind::Assign(Box::new(con_loc()), Box::new(nat(1, Con))).into();
        let env = runtime_env().with_effect(Ava);
        assert_eq!(
            typecheck(&env, &t).unwrap_err().kind,
            TypeErrorKind::EffectViolation
        );
    }

    #[test]
    fn con_value_into_ava_reference() {
        let t: Term = TermKind::Assign(Box::new(ava_loc()), Box::new(nat(1, Con))).into();
        assert_eq!(typecheck(&runtime_env(), &t).unwrap(), Type::Unit(Ava));
    }

    #[test]
    fn ava_ref_needs_lattice() {
        assert_eq!(
            kind("ref@ava(true@loc, (ava,1))"),
            TypeErrorKind::NonLatticeAva
        );
        assert_eq!(
            check("ref@ava(nat 1 @loc, (ava,1))").unwrap(),
            Type::reference(Ava, Type::Lat(Ava))
        );
    }

    #[test]
    fn flex_read_guard_in_con_branch() {
        let bad = "let p = ref@oac(nat 5 @con, (oac,1)) in
                   let o = ref@con(nat 0 @con, (con,1)) in
                   if flexread@ava(p) <= nat 2 @loc then { o := nat 1 @con } else { unit@con }";
        assert_eq!(kind(bad), TypeErrorKind::EffectViolation);
        let good = bad.replace("flexread@ava", "flexread@con");
        assert_eq!(check(&good).unwrap(), Type::Unit(Con));
    }

    #[test]
    fn records_and_projection() {
        assert_eq!(check("{a = nat 1 @loc}@con.a").unwrap(), Type::Lat(Con));
        assert_eq!(kind("{a = nat 1 @loc}@con.b"), TypeErrorKind::Unbound);
        assert_eq!(
            check("{a = nat 1 @ava}@con").unwrap(),
            Type::Record(vec![("a".into(), Type::Lat(Ava))], Con)
        );
    }

    #[test]
    fn clone_rules() {
        assert_eq!(
            check("clone@con(ref@loc(nat 1 @loc, (loc,1)), (con,1))").unwrap(),
            Type::reference(Con, Type::Lat(Con))
        );
        assert_eq!(
            kind("clone@con(nat 1 @loc, (con,1))"),
            TypeErrorKind::Mismatch
        );
        assert_eq!(
            kind("clone@con(ref@loc(nat 1 @loc, (loc,1)), (ava,4))"),
            TypeErrorKind::IdLabelMismatch
        );
        assert_eq!(
            kind("clone@ava(ref@loc(nat 1 @loc, (loc,1)), (ava,4))"),
            TypeErrorKind::OacMisuse
        );
    }

    #[test]
    fn if_joins_guard_label() {
        assert_eq!(
            check("if true@con then { nat 1 @loc } else { nat 2 @loc }").unwrap(),
            Type::Lat(Con)
        );
        assert_eq!(
            kind("if true@con then { nat 1 @loc } else { true@loc }"),
            TypeErrorKind::Mismatch
        );
    }

    #[test]
    fn application_effects() {
        assert_eq!(
            check("(fn@con(x: Lat@loc) => x) nat 1 @loc").unwrap(),
            Type::Lat(Loc)
        );
        assert_eq!(
            kind("(fn@con(x: Lat@loc) => x) nat 1 @con"),
            TypeErrorKind::FlowViolation
        );
        assert_eq!(
            kind("(fn@con(x: Lat@loc) => x) true@loc"),
            TypeErrorKind::Mismatch
        );
        assert_eq!(
            kind("if true@ava then { (fn@con(x: Lat@loc) => x) nat 1 @loc } else { nat 1 @loc }"),
            TypeErrorKind::EffectViolation
        );
    }

    #[test]
    fn oac_access_goes_through_flex_operations() {
        assert_eq!(
            kind("!ref@oac(nat 1 @loc, (oac,1))"),
            TypeErrorKind::OacMisuse
        );
        assert_eq!(
            kind("ref@oac(nat 1 @loc, (oac,1)) := nat 1 @loc"),
            TypeErrorKind::OacMisuse
        );
        assert_eq!(
            kind("flexread@con(ref@con(nat 1 @loc, (con,1)))"),
            TypeErrorKind::OacMisuse
        );
        assert_eq!(kind("nat 1 @oac"), TypeErrorKind::OacMisuse);
        assert_eq!(
            check("flexread@ava(ref@oac(nat 1 @loc, (oac,1)))").unwrap(),
            Type::Lat(Ava)
        );
    }

    #[test]
    fn nested_local_reference_cannot_escape() {
        assert_eq!(
            kind("ref@con(ref@loc(nat 1 @loc, (loc,1)), (con,1))"),
            TypeErrorKind::EscapingLocalRef
        );
    }

    #[test]
    fn program_identifier_fixpoint() {
        let p = parse_program(
            "client 0 { let r = await((con,2)) in !r }
             client 1 { let a = ref@con(nat 1 @con, (con,1)) in ref@con(!(await((con,1))), (con,2)) }",
        )
        .unwrap();
        let typing = typecheck_program(&p).unwrap();
        assert_eq!(typing.client_types[&0], Type::Lat(Con));
        assert_eq!(typing.shared.len(), 2);

        let missing = parse_program("client 0 { await((con,9)) }").unwrap();
        assert_eq!(
            typecheck_program(&missing).unwrap_err().error.kind,
            TypeErrorKind::Unbound
        );

        let conflict = parse_program(
            "client 0 { ref@con(nat 1 @con, (con,1)) } client 1 { ref@con(true@con, (con,1)) }",
        )
        .unwrap();
        assert_eq!(
            typecheck_program(&conflict).unwrap_err().error.kind,
            TypeErrorKind::Mismatch
        );
    }

    #[test]
    fn local_identifiers_are_per_client() {
        let p = parse_program(
            "client 0 { ref@loc(nat 1 @loc, (loc,1)) } client 1 { ref@loc(true@loc, (loc,1)) }",
        )
        .unwrap();
        assert!(typecheck_program(&p).is_ok());
    }
}
