//! Surface and abstract syntax: labels, terms, types, parser and printer.

pub mod ast;
pub mod label;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod types;

pub use ast::*;
pub use label::{label_join, label_leq, Label};
pub use parser::{parse, parse_program, parse_term, parse_type, Diagnostic, DiagnosticKind};
pub use pretty::{pretty, pretty_program, pretty_value};
pub use types::{join_types, label_of, subtype, type_join_label, RawKind, Type};
