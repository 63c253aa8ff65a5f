use std::collections::{BTreeMap, BTreeSet};

use crate::runtime::EventId;

/// A finite binary relation over a declared universe.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation<T: Ord + Copy = EventId> {
    pub universe: BTreeSet<T>,
    pub pairs: BTreeSet<(T, T)>,
}

impl<T: Ord + Copy> Default for Relation<T> {
    fn default() -> Self {
        Relation {
            universe: BTreeSet::new(),
            pairs: BTreeSet::new(),
        }
    }
}

impl<T: Ord + Copy> Relation<T> {
    pub fn new(universe: BTreeSet<T>) -> Self {
        Relation {
            universe,
            pairs: BTreeSet::new(),
        }
    }

    pub fn from_pairs(universe: BTreeSet<T>, pairs: impl IntoIterator<Item = (T, T)>) -> Self {
        let mut r = Relation::new(universe);
        r.pairs.extend(pairs);
        r
    }

    pub fn insert(&mut self, a: T, b: T) {
        self.pairs.insert((a, b));
    }

    pub fn contains(&self, a: T, b: T) -> bool {
        self.pairs.contains(&(a, b))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `r₁ ; r₂ = {(a, c) | ∃b. (a, b) ∈ r₁ ∧ (b, c) ∈ r₂}`.
    pub fn compose(&self, other: &Relation<T>) -> Relation<T> {
        let mut out = Relation::new(self.universe.union(&other.universe).copied().collect());
        let mut succ: BTreeMap<T, Vec<T>> = BTreeMap::new();
        for (b, c) in &other.pairs {
            succ.entry(*b).or_default().push(*c);
        }
        for (a, b) in &self.pairs {
            for c in succ.get(b).into_iter().flatten() {
                out.insert(*a, *c);
            }
        }
        out
    }

    pub fn inverse(&self) -> Relation<T> {
        Relation::from_pairs(
            self.universe.clone(),
            self.pairs.iter().map(|(a, b)| (*b, *a)),
        )
    }

    /// Complement with respect to `universe × universe`.
    pub fn negate(&self) -> Relation<T> {
        let mut out = Relation::new(self.universe.clone());
        for a in &self.universe {
            for b in &self.universe {
                if !self.contains(*a, *b) {
                    out.insert(*a, *b);
                }
            }
        }
        out
    }

    pub fn union(&self, other: &Relation<T>) -> Relation<T> {
        Relation::from_pairs(
            self.universe.union(&other.universe).copied().collect(),
            self.pairs.union(&other.pairs).copied(),
        )
    }

    pub fn intersection(&self, other: &Relation<T>) -> Relation<T> {
        Relation::from_pairs(
            self.universe.union(&other.universe).copied().collect(),
            self.pairs.intersection(&other.pairs).copied(),
        )
    }

    pub fn is_subset(&self, other: &Relation<T>) -> bool {
        self.pairs.is_subset(&other.pairs)
    }

    /// Pairs of `self` missing from `other`.
    pub fn difference(&self, other: &Relation<T>) -> Vec<(T, T)> {
        self.pairs.difference(&other.pairs).copied().collect()
    }

    /// Keeps only pairs with both ends in `keep`, and shrinks the universe.
    pub fn restrict(&self, keep: &BTreeSet<T>) -> Relation<T> {
        Relation::from_pairs(
            self.universe.intersection(keep).copied().collect(),
            self.pairs
                .iter()
                .filter(|(a, b)| keep.contains(a) && keep.contains(b))
                .copied(),
        )
    }

    pub fn filter(&self, mut f: impl FnMut(T, T) -> bool) -> Relation<T> {
        Relation::from_pairs(
            self.universe.clone(),
            self.pairs.iter().filter(|(a, b)| f(*a, *b)).copied(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(xs: &[u32]) -> BTreeSet<u32> {
        xs.iter().copied().collect()
    }

    #[test]
    fn compose_chains() {
        let u = set(&[1, 2, 3]);
        let r1 = Relation::from_pairs(u.clone(), [(1, 2)]);
        let r2 = Relation::from_pairs(u, [(2, 3)]);
        assert_eq!(r1.compose(&r2).pairs, BTreeSet::from([(1, 3)]));
    }

    #[test]
    fn compose_follows_smaller_successors() {
        let u = set(&[1, 2, 3]);
        let r1 = Relation::from_pairs(u.clone(), [(1, 3)]);
        let r2 = Relation::from_pairs(u, [(3, 2)]);
        assert_eq!(r1.compose(&r2).pairs, BTreeSet::from([(1, 2)]));
    }

    #[test]
    fn negate_empty_is_full() {
        let r: Relation<u32> = Relation::new(set(&[1, 2]));
        assert_eq!(r.negate().len(), 4);
    }

    #[test]
    fn restrict_drops_outside_pairs() {
        let r = Relation::from_pairs(set(&[1, 2, 3]), [(1, 2), (2, 3)]);
        assert_eq!(r.restrict(&set(&[1, 2])).pairs, BTreeSet::from([(1, 2)]));
    }
}
