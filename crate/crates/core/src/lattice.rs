//! Concrete join-semilattice domains backing the `Lat` base type.
//!
//! Two domains are built in: `NatMax`, the naturals ordered by `<=` (a chain),
//! and `GSet`, finite sets of strings ordered by inclusion (genuinely partial).
//! Operations across domains fail with [`DomainMismatch`].

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "domain", content = "value")]
pub enum LatticeValue {
    NatMax(u64),
    GSet(BTreeSet<String>),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("lattice domain mismatch: {left} vs {right}")]
pub struct DomainMismatch {
    pub left: &'static str,
    pub right: &'static str,
}

impl LatticeValue {
    pub fn nat(n: u64) -> Self {
        LatticeValue::NatMax(n)
    }

    pub fn set<I, S>(elems: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        LatticeValue::GSet(elems.into_iter().map(Into::into).collect())
    }

    pub fn domain(&self) -> &'static str {
        match self {
            LatticeValue::NatMax(_) => "nat",
            LatticeValue::GSet(_) => "set",
        }
    }

    fn mismatch(&self, other: &Self) -> DomainMismatch {
        DomainMismatch {
            left: self.domain(),
            right: other.domain(),
        }
    }

    pub fn join(&self, other: &Self) -> Result<Self, DomainMismatch> {
        match (self, other) {
            (LatticeValue::NatMax(a), LatticeValue::NatMax(b)) => {
                Ok(LatticeValue::NatMax(*a.max(b)))
            }
            (LatticeValue::GSet(a), LatticeValue::GSet(b)) => {
                Ok(LatticeValue::GSet(a.union(b).cloned().collect()))
            }
            _ => Err(self.mismatch(other)),
        }
    }

    pub fn meet(&self, other: &Self) -> Result<Self, DomainMismatch> {
        match (self, other) {
            (LatticeValue::NatMax(a), LatticeValue::NatMax(b)) => {
                Ok(LatticeValue::NatMax(*a.min(b)))
            }
            (LatticeValue::GSet(a), LatticeValue::GSet(b)) => {
                Ok(LatticeValue::GSet(a.intersection(b).cloned().collect()))
            }
            _ => Err(self.mismatch(other)),
        }
    }

    pub fn leq(&self, other: &Self) -> Result<bool, DomainMismatch> {
        match (self, other) {
            (LatticeValue::NatMax(a), LatticeValue::NatMax(b)) => Ok(a <= b),
            (LatticeValue::GSet(a), LatticeValue::GSet(b)) => Ok(a.is_subset(b)),
            _ => Err(self.mismatch(other)),
        }
    }

    pub fn lt(&self, other: &Self) -> Result<bool, DomainMismatch> {
        Ok(self.leq(other)? && self != other)
    }
}

pub fn lat_join(a: &LatticeValue, b: &LatticeValue) -> Result<LatticeValue, DomainMismatch> {
    a.join(b)
}

pub fn lat_meet(a: &LatticeValue, b: &LatticeValue) -> Result<LatticeValue, DomainMismatch> {
    a.meet(b)
}

pub fn lat_leq(a: &LatticeValue, b: &LatticeValue) -> Result<bool, DomainMismatch> {
    a.leq(b)
}

pub fn lat_lt(a: &LatticeValue, b: &LatticeValue) -> Result<bool, DomainMismatch> {
    a.lt(b)
}

impl fmt::Display for LatticeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatticeValue::NatMax(n) => write!(f, "nat {n}"),
            LatticeValue::GSet(elems) => {
                f.write_str("set{")?;
                for (i, e) in elems.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{e:?}")?;
                }
                f.write_str("}")
            }
        }
    }
}
