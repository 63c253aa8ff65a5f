//! A consistency-typed calculus for replicated data.
//!
//! Programs label every value with one of `loc`, `con`, `oac` or `ava`. The
//! type checker rules out flows from weaker to stronger consistency; the
//! runtime executes clients against a simulated set of replicas; the `exec`
//! module turns traces into abstract executions and checks them.

pub mod clone;
pub mod exec;
pub mod lattice;
pub mod rng;
pub mod runtime;
pub mod syntax;
pub mod typecheck;

pub use lattice::LatticeValue;
pub use syntax::{Label, Term, Type};
