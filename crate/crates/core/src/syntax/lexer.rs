use super::ast::Span;
use super::parser::Diagnostic;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Nat(u64),
    Str(String),
    JoinOp,   // \/
    MeetOp,   // /\
    Le,       // <=
    Lt,       // <
    Assign,   // :=
    FatArrow, // =>
    Arrow,    // ->
    Minus,
    Bang,
    At,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Dot,
    Eq,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Nat(n) => format!("number {n}"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::JoinOp => "`\\/`".into(),
            Tok::MeetOp => "`/\\`".into(),
            Tok::Le => "`<=`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Assign => "`:=`".into(),
            Tok::FatArrow => "`=>`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Bang => "`!`".into(),
            Tok::At => "`@`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! advance {
        ($n:expr) => {{
            for _ in 0..$n {
                if chars[i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let span = Span::new(line, col);
        let next = chars.get(i + 1).copied();
        if c.is_whitespace() {
            advance!(1);
            continue;
        }
        if c == '/' && next == Some('/') {
            while i < chars.len() && chars[i] != '\n' {
                advance!(1);
            }
            continue;
        }
        let two = |tok: Tok| Some((tok, 2));
        let one = |tok: Tok| Some((tok, 1));
        let punct = match (c, next) {
            ('\\', Some('/')) => two(Tok::JoinOp),
            ('/', Some('\\')) => two(Tok::MeetOp),
            ('<', Some('=')) => two(Tok::Le),
            (':', Some('=')) => two(Tok::Assign),
            ('=', Some('>')) => two(Tok::FatArrow),
            ('-', Some('>')) => two(Tok::Arrow),
            ('<', _) => one(Tok::Lt),
            ('-', _) => one(Tok::Minus),
            ('!', _) => one(Tok::Bang),
            ('@', _) => one(Tok::At),
            ('(', _) => one(Tok::LParen),
            (')', _) => one(Tok::RParen),
            ('{', _) => one(Tok::LBrace),
            ('}', _) => one(Tok::RBrace),
            ('[', _) => one(Tok::LBracket),
            (']', _) => one(Tok::RBracket),
            (',', _) => one(Tok::Comma),
            (';', _) => one(Tok::Semi),
            (':', _) => one(Tok::Colon),
            ('.', _) => one(Tok::Dot),
            ('=', _) => one(Tok::Eq),
            _ => None,
        };
        if let Some((tok, n)) = punct {
            out.push(Token { tok, span });
            advance!(n);
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance!(1);
            }
            let text: String = chars[start..i].iter().collect();
            let n = text.parse::<u64>().map_err(|_| {
                Diagnostic::syntax(span, format!("number `{text}` is out of range"))
            })?;
            out.push(Token {
                tok: Tok::Nat(n),
                span,
            });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len()
                && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'')
            {
                advance!(1);
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                span,
            });
            continue;
        }
        if c == '"' {
            advance!(1);
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None | Some('\n') => {
                        return Err(Diagnostic::syntax(span, "unterminated string literal"))
                    }
                    Some('"') => {
                        advance!(1);
                        break;
                    }
                    Some('\\') => {
                        let esc = chars.get(i + 1).copied();
                        match esc {
                            Some(e @ ('"' | '\\')) => {
                                s.push(e);
                                advance!(2);
                            }
                            _ => {
                                return Err(Diagnostic::syntax(
                                    Span::new(line, col),
                                    "bad escape in string",
                                ))
                            }
                        }
                    }
                    Some(ch) => {
                        s.push(*ch);
                        advance!(1);
                    }
                }
            }
            out.push(Token {
                tok: Tok::Str(s),
                span,
            });
            continue;
        }
        return Err(Diagnostic::syntax(
            span,
            format!("unexpected character `{c}`"),
        ));
    }
    out.push(Token {
        tok: Tok::Eof,
        span: Span::new(line, col),
    });
    Ok(out)
}
