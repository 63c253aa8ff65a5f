use std::fmt;

use super::label::Label;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Type {
    Bool(Label),
    Unit(Label),
    Lat(Label),
    Ref(Label, Box<Type>),
    /// `param -latent-> result` carrying its own label.
    Arrow {
        param: Box<Type>,
        latent: Label,
        result: Box<Type>,
        label: Label,
    },
    Record(Vec<(String, Type)>, Label),
}

/// Outer constructor of a type, labels erased.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RawKind {
    Bool,
    Unit,
    Lat,
    Ref,
    Arrow,
    Record,
}

impl Type {
    pub fn arrow(param: Type, latent: Label, result: Type, label: Label) -> Type {
        Type::Arrow {
            param: Box::new(param),
            latent,
            result: Box::new(result),
            label,
        }
    }

    pub fn reference(label: Label, content: Type) -> Type {
        Type::Ref(label, Box::new(content))
    }

    pub fn label(&self) -> Label {
        match self {
            Type::Bool(l) | Type::Unit(l) | Type::Lat(l) | Type::Ref(l, _) | Type::Record(_, l) => {
                *l
            }
            Type::Arrow { label, .. } => *label,
        }
    }

    pub fn raw_kind(&self) -> RawKind {
        match self {
            Type::Bool(_) => RawKind::Bool,
            Type::Unit(_) => RawKind::Unit,
            Type::Lat(_) => RawKind::Lat,
            Type::Ref(..) => RawKind::Ref,
            Type::Arrow { .. } => RawKind::Arrow,
            Type::Record(..) => RawKind::Record,
        }
    }

    /// Same constructor with the outer label replaced.
    pub fn with_label(&self, l: Label) -> Type {
        match self {
            Type::Bool(_) => Type::Bool(l),
            Type::Unit(_) => Type::Unit(l),
            Type::Lat(_) => Type::Lat(l),
            Type::Ref(_, t) => Type::Ref(l, t.clone()),
            Type::Arrow {
                param,
                latent,
                result,
                ..
            } => Type::Arrow {
                param: param.clone(),
                latent: *latent,
                result: result.clone(),
                label: l,
            },
            Type::Record(fields, _) => Type::Record(fields.clone(), l),
        }
    }

    /// `τ ∨ ℓ`: joins only the outer label.
    pub fn join_label(&self, l: Label) -> Type {
        self.with_label(self.label().join(l))
    }

    /// Whether a reference type occurs anywhere inside.
    pub fn contains_ref(&self) -> bool {
        match self {
            Type::Bool(_) | Type::Unit(_) | Type::Lat(_) => false,
            Type::Ref(..) => true,
            Type::Arrow { param, result, .. } => param.contains_ref() || result.contains_ref(),
            Type::Record(fields, _) => fields.iter().any(|(_, t)| t.contains_ref()),
        }
    }

    /// Every label occurring in the type, latent labels included.
    pub fn all_labels(&self) -> Vec<Label> {
        let mut out = Vec::new();
        self.collect_labels(&mut out);
        out
    }

    fn collect_labels(&self, out: &mut Vec<Label>) {
        out.push(self.label());
        match self {
            Type::Ref(_, t) => t.collect_labels(out),
            Type::Arrow {
                param,
                latent,
                result,
                ..
            } => {
                out.push(*latent);
                param.collect_labels(out);
                result.collect_labels(out);
            }
            Type::Record(fields, _) => fields.iter().for_each(|(_, t)| t.collect_labels(out)),
            _ => {}
        }
    }

    /// Rewrites every `loc` label to `to`, recursively.
    pub fn upgrade(&self, to: Label) -> Type {
        let up = |l: Label| if l == Label::Loc { to } else { l };
        match self {
            Type::Bool(l) => Type::Bool(up(*l)),
            Type::Unit(l) => Type::Unit(up(*l)),
            Type::Lat(l) => Type::Lat(up(*l)),
            Type::Ref(l, t) => Type::Ref(up(*l), Box::new(t.upgrade(to))),
            Type::Arrow {
                param,
                latent,
                result,
                label,
            } => Type::Arrow {
                param: Box::new(param.upgrade(to)),
                latent: up(*latent),
                result: Box::new(result.upgrade(to)),
                label: up(*label),
            },
            Type::Record(fields, l) => Type::Record(
                fields
                    .iter()
                    .map(|(n, t)| (n.clone(), t.upgrade(to)))
                    .collect(),
                up(*l),
            ),
        }
    }

    pub fn field(&self, name: &str) -> Option<&Type> {
        match self {
            Type::Record(fields, _) => fields.iter().find(|(n, _)| n == name).map(|(_, t)| t),
            _ => None,
        }
    }
}

pub fn label_of(t: &Type) -> Label {
    t.label()
}

pub fn type_join_label(t: &Type, l: Label) -> Type {
    t.join_label(l)
}

/// The subtyping relation: base types covariant in their label, arrows
/// contravariant in the argument and latent label, references invariant in
/// content, records with width and depth subtyping.
pub fn subtype(a: &Type, b: &Type) -> bool {
    match (a, b) {
        (Type::Bool(l1), Type::Bool(l2))
        | (Type::Unit(l1), Type::Unit(l2))
        | (Type::Lat(l1), Type::Lat(l2)) => l1.leq(*l2),
        (Type::Ref(l1, t1), Type::Ref(l2, t2)) => l1.leq(*l2) && t1 == t2,
        (
            Type::Arrow {
                param: p1,
                latent: lat1,
                result: r1,
                label: l1,
            },
            Type::Arrow {
                param: p2,
                latent: lat2,
                result: r2,
                label: l2,
            },
        ) => subtype(p2, p1) && subtype(r1, r2) && l1.leq(*l2) && lat2.leq(*lat1),
        (Type::Record(f1, l1), Type::Record(f2, l2)) => {
            l1.leq(*l2)
                && f2.iter().all(|(name, t2)| {
                    f1.iter()
                        .find(|(n, _)| n == name)
                        .is_some_and(|(_, t1)| subtype(t1, t2))
                })
        }
        _ => false,
    }
}

/// Whether `a` and `b` would be subtypes if all labels were ignored.
/// Used to tell a label-flow failure apart from a shape mismatch.
pub fn shape_compatible(a: &Type, b: &Type) -> bool {
    match (a, b) {
        (Type::Bool(_), Type::Bool(_))
        | (Type::Unit(_), Type::Unit(_))
        | (Type::Lat(_), Type::Lat(_)) => true,
        (Type::Ref(_, t1), Type::Ref(_, t2)) => {
            shape_compatible(t1, t2) && shape_compatible(t2, t1)
        }
        (
            Type::Arrow {
                param: p1,
                result: r1,
                ..
            },
            Type::Arrow {
                param: p2,
                result: r2,
                ..
            },
        ) => shape_compatible(p2, p1) && shape_compatible(r1, r2),
        (Type::Record(f1, _), Type::Record(f2, _)) => f2.iter().all(|(name, t2)| {
            f1.iter()
                .find(|(n, _)| n == name)
                .is_some_and(|(_, t1)| shape_compatible(t1, t2))
        }),
        _ => false,
    }
}

/// `τ₁ ∨ τ₂`, defined only when the two types agree everywhere except
/// their outer label.
pub fn join_types(a: &Type, b: &Type) -> Option<Type> {
    if a.with_label(Label::Loc) == b.with_label(Label::Loc) {
        Some(a.with_label(a.label().join(b.label())))
    } else {
        None
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Bool(l) => write!(f, "Bool@{l}"),
            Type::Unit(l) => write!(f, "Unit@{l}"),
            Type::Lat(l) => write!(f, "Lat@{l}"),
            Type::Ref(l, t) => write!(f, "Ref@{l} {t}"),
            Type::Arrow {
                param,
                latent,
                result,
                label,
            } => write!(f, "({param} -{latent}-> {result})@{label}"),
            Type::Record(fields, l) => {
                f.write_str("{")?;
                for (i, (n, t)) in fields.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{n}: {t}")?;
                }
                write!(f, "}}@{l}")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::*;

    #[test]
    fn join_label_examples() {
        assert_eq!(type_join_label(&Type::Bool(Con), Ava), Type::Bool(Ava));
        let r = Type::reference(Con, Type::Lat(Con));
        assert_eq!(type_join_label(&r, Loc), r);
        let f = Type::arrow(Type::Lat(Loc), Oac, Type::Unit(Loc), Con);
        assert_eq!(
            type_join_label(&f, Ava),
            Type::arrow(Type::Lat(Loc), Oac, Type::Unit(Loc), Ava)
        );
    }

    #[test]
    fn base_subtyping() {
        assert!(subtype(&Type::Bool(Con), &Type::Bool(Ava)));
        assert!(!subtype(&Type::Bool(Ava), &Type::Bool(Con)));
        assert!(!subtype(&Type::Bool(Con), &Type::Lat(Con)));
    }

    #[test]
    fn arrow_subtyping_example() {
        let a = Type::arrow(Type::Bool(Ava), Con, Type::Unit(Loc), Loc);
        let b = Type::arrow(Type::Bool(Con), Loc, Type::Unit(Con), Con);
        assert!(subtype(&a, &b));
        assert!(!subtype(&b, &a));
    }

    #[test]
    fn ref_is_invariant_in_content() {
        let a = Type::reference(Con, Type::Lat(Loc));
        let b = Type::reference(Con, Type::Lat(Con));
        assert!(!subtype(&a, &b));
        assert!(!subtype(&b, &a));
        assert!(subtype(
            &Type::reference(Con, Type::Lat(Con)),
            &Type::reference(Ava, Type::Lat(Con))
        ));
    }

    #[test]
    fn record_width_and_depth() {
        let wide = Type::Record(
            vec![("a".into(), Type::Lat(Loc)), ("b".into(), Type::Bool(Loc))],
            Loc,
        );
        let narrow = Type::Record(vec![("a".into(), Type::Lat(Con))], Con);
        assert!(subtype(&wide, &narrow));
        assert!(!subtype(&narrow, &wide));
    }

    #[test]
    fn upgrade_rewrites_every_loc() {
        let t = Type::reference(Loc, Type::reference(Loc, Type::Lat(Loc)));
        assert_eq!(
            t.upgrade(Con),
            Type::reference(Con, Type::reference(Con, Type::Lat(Con)))
        );
        assert_eq!(Type::Lat(Ava).upgrade(Con), Type::Lat(Ava));
    }

    #[test]
    fn join_types_needs_equal_raw_types() {
        assert_eq!(
            join_types(&Type::Lat(Loc), &Type::Lat(Con)),
            Some(Type::Lat(Con))
        );
        assert_eq!(join_types(&Type::Lat(Loc), &Type::Bool(Con)), None);
        let a = Type::reference(Con, Type::Lat(Loc));
        let b = Type::reference(Con, Type::Lat(Con));
        assert_eq!(join_types(&a, &b), None);
    }
}
