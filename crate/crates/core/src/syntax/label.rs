use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Consistency label. The declaration order is the chain
/// `loc <= con <= oac <= ava`; a lower label means stronger consistency.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Loc,
    Con,
    Oac,
    Ava,
}

impl Label {
    pub const ALL: [Label; 4] = [Label::Loc, Label::Con, Label::Oac, Label::Ava];

    pub fn leq(self, other: Label) -> bool {
        self <= other
    }

    pub fn lt(self, other: Label) -> bool {
        self < other
    }

    /// Least upper bound in the chain.
    pub fn join(self, other: Label) -> Label {
        self.max(other)
    }

    pub fn meet(self, other: Label) -> Label {
        self.min(other)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Loc => "loc",
            Label::Con => "con",
            Label::Oac => "oac",
            Label::Ava => "ava",
        }
    }

    /// Labels whose locations live on the servers.
    pub fn is_distributed(self) -> bool {
        self != Label::Loc
    }
}

pub fn label_leq(a: Label, b: Label) -> bool {
    a.leq(b)
}

pub fn label_join(a: Label, b: Label) -> Label {
    a.join(b)
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "loc" => Ok(Label::Loc),
            "con" => Ok(Label::Con),
            "oac" => Ok(Label::Oac),
            "ava" => Ok(Label::Ava),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Position of each label in the chain, written out by hand.
    fn rank(l: Label) -> u8 {
        match l {
            Label::Loc => 0,
            Label::Con => 1,
            Label::Oac => 2,
            Label::Ava => 3,
        }
    }

    #[test]
    fn leq_examples() {
        assert!(label_leq(Label::Loc, Label::Ava));
        assert!(label_leq(Label::Con, Label::Con));
        assert!(!label_leq(Label::Ava, Label::Con));
    }

    #[test]
    fn leq_matches_chain_on_all_pairs() {
        for a in Label::ALL {
            for b in Label::ALL {
                assert_eq!(label_leq(a, b), rank(a) <= rank(b), "{a} <= {b}");
            }
        }
    }

    #[test]
    fn join_examples() {
        assert_eq!(label_join(Label::Con, Label::Ava), Label::Ava);
        assert_eq!(label_join(Label::Loc, Label::Loc), Label::Loc);
    }

    #[test]
    fn join_laws_over_all_triples() {
        for a in Label::ALL {
            for b in Label::ALL {
                assert_eq!(label_join(a, b), label_join(b, a));
                assert_eq!(label_join(a, b) == b, label_leq(a, b));
                for c in Label::ALL {
                    assert_eq!(
                        label_join(label_join(a, b), c),
                        label_join(a, label_join(b, c))
                    );
                }
            }
        }
    }

    #[test]
    fn parse_roundtrip() {
        for l in Label::ALL {
            assert_eq!(l.as_str().parse::<Label>().unwrap(), l);
        }
        assert!("high".parse::<Label>().is_err());
    }
}
