//! Recursive-descent parser for the surface syntax.
//!
//! ```text
//! program  := ("servers" NAT ";")? client+
//! client   := "client" NAT "{" term "}"
//! term     := "fn" "@" label "(" IDENT ":" type ")" "=>" term
//!           | "if" term "then" "{" term "}" "else" "{" term "}"
//!           | "let" IDENT "=" term "in" term
//!           | assign
//! assign   := binop (":=" binop)?
//! binop    := app (("\/" | "/\" | "<=" | "<") app)*
//! app      := prefix+
//! prefix   := "!" prefix | atom ("." IDENT | "[" label "]")*
//! atom     := IDENT | literal "@" label | "{" (IDENT "=" term),* "}" "@" label | "(" term ")"
//!           | "ref" "@" label "(" term "," idlit ")" | "clone" "@" label "(" term "," idlit ")"
//!           | "await" "(" idlit ")" | "flexread" "@" label "(" term ")"
//!           | "flexwrite" "@" label "(" term "," term ")"
//! ```
//!
//! `ref`, `clone`, `await`, `flexread` and `flexwrite` are accepted wherever an
//! atom is; they are self-delimiting so this adds no ambiguity.

use std::collections::BTreeSet;
use std::fmt;

use super::ast::*;
use super::label::Label;
use super::lexer::{tokenize, Tok, Token};
use super::types::Type;
use crate::lattice::LatticeValue;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiagnosticKind {
    SyntaxError,
    LabelMisuse,
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiagnosticKind::SyntaxError => f.write_str("SyntaxError"),
            DiagnosticKind::LabelMisuse => f.write_str("LabelMisuse"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub span: Span,
    pub kind: DiagnosticKind,
    pub message: String,
}

impl Diagnostic {
    pub fn syntax(span: Span, message: impl Into<String>) -> Self {
        Diagnostic {
            span,
            kind: DiagnosticKind::SyntaxError,
            message: message.into(),
        }
    }

    fn label_misuse(span: Span, message: impl Into<String>) -> Self {
        Diagnostic {
            span,
            kind: DiagnosticKind::LabelMisuse,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}: {}: {}",
            self.span.line, self.span.col, self.kind, self.message
        )
    }
}

const KEYWORDS: &[&str] = &[
    "servers",
    "client",
    "fn",
    "if",
    "then",
    "else",
    "ref",
    "clone",
    "await",
    "flexread",
    "flexwrite",
    "let",
    "in",
    "nat",
    "set",
    "true",
    "false",
    "unit",
    "loc",
    "con",
    "oac",
    "ava",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

/// Parses a single term.
pub fn parse(source: &str) -> Result<Term, Vec<Diagnostic>> {
    parse_term(source)
}

pub fn parse_term(source: &str) -> Result<Term, Vec<Diagnostic>> {
    let mut p = Parser::new(source).map_err(|d| vec![d])?;
    let t = p.term().map_err(|d| vec![d])?;
    p.expect(&Tok::Eof).map_err(|d| vec![d])?;
    Ok(t)
}

pub fn parse_type(source: &str) -> Result<Type, Vec<Diagnostic>> {
    let mut p = Parser::new(source).map_err(|d| vec![d])?;
    let t = p.ty().map_err(|d| vec![d])?;
    p.expect(&Tok::Eof).map_err(|d| vec![d])?;
    Ok(t)
}

pub fn parse_program(source: &str) -> Result<Program, Vec<Diagnostic>> {
    let mut p = Parser::new(source).map_err(|d| vec![d])?;
    p.program().map_err(|d| vec![d])
}

type PResult<T> = Result<T, Diagnostic>;

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn new(source: &str) -> PResult<Self> {
        Ok(Parser {
            toks: tokenize(source)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn unexpected(&self, what: &str) -> Diagnostic {
        Diagnostic::syntax(
            self.span(),
            format!("expected {what}, found {}", self.peek().describe()),
        )
    }

    fn expect(&mut self, tok: &Tok) -> PResult<Span> {
        if self.peek() == tok {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<Span> {
        if self.at_kw(kw) {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn nat(&mut self) -> PResult<u64> {
        match self.peek() {
            Tok::Nat(n) => {
                let n = *n;
                self.bump();
                Ok(n)
            }
            _ => Err(self.unexpected("a natural number")),
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek() {
            Tok::Ident(s) if !is_keyword(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected("an identifier")),
        }
    }

    fn label(&mut self) -> PResult<Label> {
        let span = self.span();
        match self.peek() {
            Tok::Ident(s) => match s.parse::<Label>() {
                Ok(l) => {
                    self.bump();
                    Ok(l)
                }
                Err(_) => Err(Diagnostic::syntax(
                    span,
                    format!("expected a label (loc, con, oac, ava), found `{s}`"),
                )),
            },
            _ => Err(self.unexpected("a label")),
        }
    }

    fn at_label(&mut self) -> PResult<Label> {
        self.expect(&Tok::At)?;
        self.label()
    }

    fn idlit(&mut self) -> PResult<Identifier> {
        self.expect(&Tok::LParen)?;
        let l = self.label()?;
        self.expect(&Tok::Comma)?;
        let n = self.nat()?;
        self.expect(&Tok::RParen)?;
        Ok(Identifier::new(l, n))
    }

    fn program(&mut self) -> PResult<Program> {
        let mut servers = DEFAULT_SERVERS;
        if self.at_kw("servers") {
            let span = self.bump().span;
            let n = self.nat()?;
            if n == 0 {
                return Err(Diagnostic::syntax(
                    span,
                    "a program needs at least one server",
                ));
            }
            servers = n as usize;
            self.expect(&Tok::Semi)?;
        }
        let mut clients = Vec::new();
        let mut seen = BTreeSet::new();
        while self.at_kw("client") {
            let span = self.bump().span;
            let id = self.nat()?;
            let id = ClientId::try_from(id)
                .map_err(|_| Diagnostic::syntax(span, "client id out of range"))?;
            if !seen.insert(id) {
                return Err(Diagnostic::syntax(
                    span,
                    format!("client {id} declared twice"),
                ));
            }
            self.expect(&Tok::LBrace)?;
            let body = self.term()?;
            self.expect(&Tok::RBrace)?;
            clients.push(ClientDecl { id, body, span });
        }
        if clients.is_empty() {
            return Err(self.unexpected("`client`"));
        }
        self.expect(&Tok::Eof)?;
        Ok(Program { servers, clients })
    }

    pub(crate) fn term(&mut self) -> PResult<Term> {
        let span = self.span();
        if self.at_kw("fn") {
            self.bump();
            let latent = self.at_label()?;
            self.expect(&Tok::LParen)?;
            let param = self.ident()?;
            self.expect(&Tok::Colon)?;
            let param_ty = self.ty()?;
            self.expect(&Tok::RParen)?;
            self.expect(&Tok::FatArrow)?;
            let body = self.term()?;
            let abs = Abstraction {
                latent,
                param,
                param_ty,
                body,
            };
            return Ok(Term::new(
                TermKind::Value(Value::plain(RawValue::Abs(Box::new(abs)), Label::Loc)),
                span,
            ));
        }
        if self.at_kw("if") {
            self.bump();
            let guard = self.term()?;
            self.expect_kw("then")?;
            self.expect(&Tok::LBrace)?;
            let then_branch = self.term()?;
            self.expect(&Tok::RBrace)?;
            self.expect_kw("else")?;
            self.expect(&Tok::LBrace)?;
            let else_branch = self.term()?;
            self.expect(&Tok::RBrace)?;
            return Ok(Term::new(
                TermKind::If(
                    Box::new(guard),
                    Box::new(then_branch),
                    Box::new(else_branch),
                ),
                span,
            ));
        }
        if self.at_kw("let") {
            self.bump();
            let name = self.ident()?;
            self.expect(&Tok::Eq)?;
            let bound = self.term()?;
            self.expect_kw("in")?;
            let body = self.term()?;
            return Ok(Term::new(
                TermKind::Let(name, Box::new(bound), Box::new(body)),
                span,
            ));
        }
        self.assign()
    }

    fn assign(&mut self) -> PResult<Term> {
        let lhs = self.binop()?;
        if self.peek() == &Tok::Assign {
            let span = self.bump().span;
            let rhs = self.binop()?;
            return Ok(Term::new(
                TermKind::Assign(Box::new(lhs), Box::new(rhs)),
                span,
            ));
        }
        Ok(lhs)
    }

    fn binop(&mut self) -> PResult<Term> {
        let mut lhs = self.app()?;
        loop {
            let make: fn(Box<Term>, Box<Term>) -> TermKind = match self.peek() {
                Tok::JoinOp => |a, b| TermKind::LatOp(LatOp::Join, a, b),
                Tok::MeetOp => |a, b| TermKind::LatOp(LatOp::Meet, a, b),
                Tok::Le => |a, b| TermKind::Rel(RelOp::Leq, a, b),
                Tok::Lt => |a, b| TermKind::Rel(RelOp::Lt, a, b),
                _ => return Ok(lhs),
            };
            let span = self.bump().span;
            let rhs = self.app()?;
            lhs = Term::new(make(Box::new(lhs), Box::new(rhs)), span);
        }
    }

    fn starts_prefix(&self) -> bool {
        match self.peek() {
            Tok::Bang | Tok::LParen | Tok::LBrace => true,
            Tok::Ident(s) => {
                !is_keyword(s)
                    || matches!(
                        s.as_str(),
                        "nat"
                            | "set"
                            | "true"
                            | "false"
                            | "unit"
                            | "ref"
                            | "clone"
                            | "await"
                            | "flexread"
                            | "flexwrite"
                    )
            }
            _ => false,
        }
    }

    fn app(&mut self) -> PResult<Term> {
        let mut f = self.prefix()?;
        while self.starts_prefix() {
            let span = self.span();
            let arg = self.prefix()?;
            f = Term::new(TermKind::App(Box::new(f), Box::new(arg)), span);
        }
        Ok(f)
    }

    fn prefix(&mut self) -> PResult<Term> {
        if self.peek() == &Tok::Bang {
            let span = self.bump().span;
            let inner = self.prefix()?;
            return Ok(Term::new(TermKind::Deref(Box::new(inner)), span));
        }
        let mut t = self.atom()?;
        loop {
            match self.peek() {
                Tok::Dot => {
                    let span = self.bump().span;
                    let field = self.ident()?;
                    t = Term::new(TermKind::Proj(Box::new(t), field), span);
                }
                Tok::LBracket => {
                    let span = self.bump().span;
                    let l = self.label()?;
                    self.expect(&Tok::RBracket)?;
                    t = Term::new(TermKind::Restrict(Box::new(t), l), span);
                }
                _ => return Ok(t),
            }
        }
    }

    fn atom(&mut self) -> PResult<Term> {
        let span = self.span();
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let t = self.term()?;
                self.expect(&Tok::RParen)?;
                Ok(t)
            }
            Tok::LBrace => {
                self.bump();
                let mut fields: Vec<(String, Term)> = Vec::new();
                if self.peek() != &Tok::RBrace {
                    loop {
                        let fspan = self.span();
                        let name = self.ident()?;
                        if fields.iter().any(|(n, _)| n == &name) {
                            return Err(Diagnostic::syntax(
                                fspan,
                                format!("duplicate field `{name}`"),
                            ));
                        }
                        self.expect(&Tok::Eq)?;
                        let t = self.term()?;
                        fields.push((name, t));
                        if self.peek() == &Tok::Comma {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(&Tok::RBrace)?;
                let l = self.at_label()?;
                Ok(Term::new(TermKind::Record(fields, l), span))
            }
            Tok::Ident(word) => match word.as_str() {
                "nat" => {
                    self.bump();
                    let n = self.nat()?;
                    let l = self.at_label()?;
                    Ok(Term::new(
                        TermKind::Value(Value::lat(LatticeValue::nat(n), l)),
                        span,
                    ))
                }
                "set" => {
                    self.bump();
                    self.expect(&Tok::LBrace)?;
                    let mut elems = BTreeSet::new();
                    if self.peek() != &Tok::RBrace {
                        loop {
                            match self.peek().clone() {
                                Tok::Str(s) => {
                                    self.bump();
                                    elems.insert(s);
                                }
                                _ => return Err(self.unexpected("a string")),
                            }
                            if self.peek() == &Tok::Comma {
                                self.bump();
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(&Tok::RBrace)?;
                    let l = self.at_label()?;
                    Ok(Term::new(
                        TermKind::Value(Value::lat(LatticeValue::GSet(elems), l)),
                        span,
                    ))
                }
                "true" | "false" => {
                    self.bump();
                    let l = self.at_label()?;
                    Ok(Term::new(
                        TermKind::Value(Value::boolean(word == "true", l)),
                        span,
                    ))
                }
                "unit" => {
                    self.bump();
                    let l = self.at_label()?;
                    Ok(Term::new(TermKind::Value(Value::unit(l)), span))
                }
                "ref" | "clone" => {
                    self.bump();
                    let l = self.at_label()?;
                    self.expect(&Tok::LParen)?;
                    let body = self.term()?;
                    self.expect(&Tok::Comma)?;
                    let id = self.idlit()?;
                    self.expect(&Tok::RParen)?;
                    let kind = if word == "ref" {
                        TermKind::Ref(l, Box::new(body), id)
                    } else {
                        TermKind::Clone(l, Box::new(body), id)
                    };
                    Ok(Term::new(kind, span))
                }
                "await" => {
                    self.bump();
                    self.expect(&Tok::LParen)?;
                    let id = self.idlit()?;
                    self.expect(&Tok::RParen)?;
                    Ok(Term::new(TermKind::Await(id), span))
                }
                "flexread" | "flexwrite" => {
                    self.bump();
                    let lspan = self.span();
                    let l = self.at_label()?;
                    if !matches!(l, Label::Con | Label::Ava) {
                        let what = if word == "flexread" {
                            "FlexRead"
                        } else {
                            "FlexWrite"
                        };
                        return Err(Diagnostic::label_misuse(
                            lspan,
                            format!("{what} label must be con or ava"),
                        ));
                    }
                    self.expect(&Tok::LParen)?;
                    let target = self.term()?;
                    let kind = if word == "flexread" {
                        TermKind::FlexRead(l, Box::new(target))
                    } else {
                        self.expect(&Tok::Comma)?;
                        let payload = self.term()?;
                        TermKind::FlexWrite(l, Box::new(target), Box::new(payload))
                    };
                    self.expect(&Tok::RParen)?;
                    Ok(Term::new(kind, span))
                }
                _ if !is_keyword(&word) => {
                    self.bump();
                    Ok(Term::new(TermKind::Var(word), span))
                }
                _ => Err(self.unexpected("a term")),
            },
            _ => Err(self.unexpected("a term")),
        }
    }

    fn ty(&mut self) -> PResult<Type> {
        match self.peek().clone() {
            Tok::Ident(word) => match word.as_str() {
                "Bool" | "Unit" | "Lat" => {
                    self.bump();
                    let l = self.at_label()?;
                    Ok(match word.as_str() {
                        "Bool" => Type::Bool(l),
                        "Unit" => Type::Unit(l),
                        _ => Type::Lat(l),
                    })
                }
                "Ref" => {
                    self.bump();
                    let l = self.at_label()?;
                    let content = self.ty()?;
                    Ok(Type::reference(l, content))
                }
                _ => Err(self.unexpected("a type")),
            },
            Tok::LParen => {
                self.bump();
                let param = self.ty()?;
                self.expect(&Tok::Minus)?;
                let latent = self.label()?;
                self.expect(&Tok::Arrow)?;
                let result = self.ty()?;
                self.expect(&Tok::RParen)?;
                let l = self.at_label()?;
                Ok(Type::arrow(param, latent, result, l))
            }
            Tok::LBrace => {
                self.bump();
                let mut fields: Vec<(String, Type)> = Vec::new();
                if self.peek() != &Tok::RBrace {
                    loop {
                        let fspan = self.span();
                        let name = self.ident()?;
                        if fields.iter().any(|(n, _)| n == &name) {
                            return Err(Diagnostic::syntax(
                                fspan,
                                format!("duplicate field `{name}`"),
                            ));
                        }
                        self.expect(&Tok::Colon)?;
                        fields.push((name, self.ty()?));
                        if self.peek() == &Tok::Comma {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(&Tok::RBrace)?;
                let l = self.at_label()?;
                Ok(Type::Record(fields, l))
            }
            _ if self.peek_at(0) == &Tok::Eof => Err(self.unexpected("a type")),
            _ => Err(self.unexpected("a type")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ref_literal() {
        let t = parse("ref@con(nat 3 @con, (con,1))").unwrap();
        match t.kind {
            TermKind::Ref(Label::Con, body, id) => {
                assert_eq!(
                    *body,
                    Term::from(Value::lat(LatticeValue::nat(3), Label::Con))
                );
                assert_eq!(id, Identifier::new(Label::Con, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn deref_binds_tighter_than_assign() {
        let t = parse("!x := y").unwrap();
        match t.kind {
            TermKind::Assign(lhs, rhs) => {
                assert!(matches!(lhs.kind, TermKind::Deref(_)));
                assert_eq!(rhs.kind, TermKind::Var("y".into()));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn flexread_label_checked_at_parse_time() {
        let errs = parse("flexread@loc(x)").unwrap_err();
        assert_eq!(errs[0].kind, DiagnosticKind::LabelMisuse);
        assert_eq!(errs[0].message, "FlexRead label must be con or ava");
        let errs = parse("flexwrite@oac(x, y)").unwrap_err();
        assert_eq!(errs[0].message, "FlexWrite label must be con or ava");
    }

    #[test]
    fn application_is_left_associative() {
        let t = parse("f a b").unwrap();
        match t.kind {
            TermKind::App(f, b) => {
                assert!(matches!(f.kind, TermKind::App(..)));
                assert_eq!(b.kind, TermKind::Var("b".into()));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn postfix_projection_and_restriction() {
        let t = parse("{a = nat 1 @loc}@con.a[ava]").unwrap();
        match t.kind {
            TermKind::Restrict(inner, Label::Ava) => {
                assert!(matches!(inner.kind, TermKind::Proj(_, ref f) if f == "a"))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn arrow_and_record_types() {
        let t = parse_type("(Lat@loc -con-> {a: Bool@con, b: Ref@ava Lat@ava}@loc)@con").unwrap();
        assert_eq!(
            t,
            Type::arrow(
                Type::Lat(Label::Loc),
                Label::Con,
                Type::Record(
                    vec![
                        ("a".into(), Type::Bool(Label::Con)),
                        (
                            "b".into(),
                            Type::reference(Label::Ava, Type::Lat(Label::Ava))
                        )
                    ],
                    Label::Loc
                ),
                Label::Con
            )
        );
    }

    #[test]
    fn program_header_and_clients() {
        let p = parse_program("servers 2; client 0 { unit@loc } client 7 { x }").unwrap();
        assert_eq!(p.servers, 2);
        assert_eq!(
            p.clients.iter().map(|c| c.id).collect::<Vec<_>>(),
            vec![0, 7]
        );
        let p = parse_program("client 1 { unit@loc }").unwrap();
        assert_eq!(p.servers, DEFAULT_SERVERS);
    }

    #[test]
    fn errors_carry_positions() {
        let errs = parse("let x = \n  in y").unwrap_err();
        assert_eq!((errs[0].span.line, errs[0].span.col), (2, 3));
        assert_eq!(errs[0].kind, DiagnosticKind::SyntaxError);
        assert!(parse_program("client 0 { unit@loc } client 0 { unit@loc }").is_err());
        assert!(parse("nat 3").is_err());
    }
}
