//! Printer producing surface syntax. Every compound form is parenthesized,
//! so output of a parsed term parses back to the same tree. Runtime-only
//! forms (locations, `duplicated`, closures with a non-`loc` own label) print
//! in a readable but not necessarily re-parsable way.

use std::fmt::Write;

use super::ast::*;
use super::label::Label;
use crate::lattice::LatticeValue;

pub fn pretty(t: &Term) -> String {
    let mut out = String::new();
    term(t, &mut out);
    out
}

pub fn pretty_value(v: &Value) -> String {
    let mut out = String::new();
    value(v, &mut out);
    out
}

pub fn pretty_program(p: &Program) -> String {
    let mut out = format!("servers {};\n", p.servers);
    for c in &p.clients {
        let _ = writeln!(out, "client {} {{ {} }}", c.id, pretty(&c.body));
    }
    out
}

fn lattice(d: &LatticeValue, out: &mut String) {
    match d {
        LatticeValue::NatMax(n) => {
            let _ = write!(out, "nat {n}");
        }
        LatticeValue::GSet(elems) => {
            out.push_str("set{");
            for (i, e) in elems.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push('"');
                for c in e.chars() {
                    if c == '"' || c == '\\' {
                        out.push('\\');
                    }
                    out.push(c);
                }
                out.push('"');
            }
            out.push('}');
        }
    }
}

fn value(v: &Value, out: &mut String) {
    match v {
        Value::Duplicated(t) => {
            out.push_str("duplicated(");
            term(t, out);
            out.push(')');
        }
        Value::Plain { raw, label } => match raw {
            RawValue::Lat(d) => {
                lattice(d, out);
                let _ = write!(out, " @{label}");
            }
            RawValue::Bool(b) => {
                let _ = write!(out, "{b}@{label}");
            }
            RawValue::Unit => {
                let _ = write!(out, "unit@{label}");
            }
            RawValue::Loc(o) => {
                let _ = write!(out, "{o}@{label}");
            }
            RawValue::Abs(abs) => {
                let _ = write!(
                    out,
                    "(fn@{}({}: {}) => ",
                    abs.latent, abs.param, abs.param_ty
                );
                term(&abs.body, out);
                out.push(')');
                if *label != Label::Loc {
                    let _ = write!(out, "[{label}]");
                }
            }
            RawValue::Record(fields) => {
                out.push('{');
                for (i, (n, f)) in fields.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    let _ = write!(out, "{n} = ");
                    value(f, out);
                }
                let _ = write!(out, "}}@{label}");
            }
        },
    }
}

fn binary(a: &Term, op: &str, b: &Term, out: &mut String) {
    out.push('(');
    term(a, out);
    let _ = write!(out, " {op} ");
    term(b, out);
    out.push(')');
}

fn term(t: &Term, out: &mut String) {
    use TermKind::*;
    match &t.kind {
        Var(x) => out.push_str(x),
        Value(v) => value(v, out),
        Restrict(inner, l) => {
            term(inner, out);
            let _ = write!(out, "[{l}]");
        }
        LatOp(op, a, b) => binary(
            a,
            match op {
                super::ast::LatOp::Join => "\\/",
                super::ast::LatOp::Meet => "/\\",
            },
            b,
            out,
        ),
        Rel(op, a, b) => binary(
            a,
            match op {
                RelOp::Leq => "<=",
                RelOp::Lt => "<",
            },
            b,
            out,
        ),
        App(f, a) => {
            out.push('(');
            term(f, out);
            out.push(' ');
            term(a, out);
            out.push(')');
        }
        If(g, th, el) => {
            out.push_str("(if ");
            term(g, out);
            out.push_str(" then { ");
            term(th, out);
            out.push_str(" } else { ");
            term(el, out);
            out.push_str(" })");
        }
        Let(x, a, b) => {
            let _ = write!(out, "(let {x} = ");
            term(a, out);
            out.push_str(" in ");
            term(b, out);
            out.push(')');
        }
        Ref(l, inner, id) | Clone(l, inner, id) => {
            let kw = if matches!(t.kind, Ref(..)) {
                "ref"
            } else {
                "clone"
            };
            let _ = write!(out, "{kw}@{l}(");
            term(inner, out);
            let _ = write!(out, ", {id})");
        }
        Await(id) => {
            let _ = write!(out, "await({id})");
        }
        Deref(inner) => {
            out.push_str("(!");
            term(inner, out);
            out.push(')');
        }
        Assign(a, b) => binary(a, ":=", b, out),
        FlexRead(l, inner) => {
            let _ = write!(out, "flexread@{l}(");
            term(inner, out);
            out.push(')');
        }
        FlexWrite(l, a, b) => {
            let _ = write!(out, "flexwrite@{l}(");
            term(a, out);
            out.push_str(", ");
            term(b, out);
            out.push(')');
        }
        Record(fields, l) => {
            out.push('{');
            for (i, (n, f)) in fields.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "{n} = ");
                term(f, out);
            }
            let _ = write!(out, "}}@{l}");
        }
        Proj(inner, f) => {
            term(inner, out);
            let _ = write!(out, ".{f}");
        }
    }
}

impl std::fmt::Display for Term {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&pretty(self))
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&pretty_value(self))
    }
}
