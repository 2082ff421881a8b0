use super::ast::{Atom, CmpOp, Formula, RawFormula, Relation, Term};

/// Pushes negations to the atoms and rewrites every comparison into `p ~ 0`
/// with `~` one of `=`, `<`, `<=`.
///
/// Nested conjunctions (disjunctions) are flattened and single-child nodes collapse,
/// so normalizing an already normal formula is the identity.
pub fn normalize(raw: &RawFormula) -> Formula {
    lower(raw, false)
}

/// Normal form of the conjunction of `assertions`.
pub fn normalize_all(assertions: &[RawFormula]) -> Formula {
    let parts: Vec<Formula> = assertions.iter().map(normalize).collect();
    and(parts)
}

fn lower(raw: &RawFormula, negated: bool) -> Formula {
    match raw {
        RawFormula::Not(inner) => lower(inner, !negated),
        RawFormula::And(cs) => {
            let parts = cs.iter().map(|c| lower(c, negated)).collect();
            if negated {
                or(parts)
            } else {
                and(parts)
            }
        }
        RawFormula::Or(cs) => {
            let parts = cs.iter().map(|c| lower(c, negated)).collect();
            if negated {
                and(parts)
            } else {
                or(parts)
            }
        }
        RawFormula::Cmp(op, a, b) => comparison(*op, negated, a, b),
    }
}

fn comparison(op: CmpOp, negated: bool, a: &Term, b: &Term) -> Formula {
    let atom = |lhs: &Term, rhs: &Term, rel| {
        Formula::Atom(Atom::new(Term::difference(lhs.clone(), rhs.clone()), rel))
    };
    match (op, negated) {
        (CmpOp::Eq, false) => atom(a, b, Relation::Eq),
        (CmpOp::Eq, true) => Formula::Or(vec![atom(a, b, Relation::Lt), atom(b, a, Relation::Lt)]),
        (CmpOp::Lt, false) | (CmpOp::Ge, true) => atom(a, b, Relation::Lt),
        (CmpOp::Le, false) | (CmpOp::Gt, true) => atom(a, b, Relation::Le),
        (CmpOp::Gt, false) | (CmpOp::Le, true) => atom(b, a, Relation::Lt),
        (CmpOp::Ge, false) | (CmpOp::Lt, true) => atom(b, a, Relation::Le),
    }
}

pub(crate) fn and(parts: Vec<Formula>) -> Formula {
    let mut flat = Vec::with_capacity(parts.len());
    for p in parts {
        match p {
            Formula::And(cs) => flat.extend(cs),
            other => flat.push(other),
        }
    }
    if flat.len() == 1 {
        flat.pop().expect("one child")
    } else {
        Formula::And(flat)
    }
}

pub(crate) fn or(parts: Vec<Formula>) -> Formula {
    let mut flat = Vec::with_capacity(parts.len());
    for p in parts {
        match p {
            Formula::Or(cs) => flat.extend(cs),
            other => flat.push(other),
        }
    }
    if flat.len() == 1 {
        flat.pop().expect("one child")
    } else {
        Formula::Or(flat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Term {
        Term::Var(0)
    }

    #[test]
    fn not_lt_flips_to_le() {
        let raw = RawFormula::Not(Box::new(RawFormula::Cmp(CmpOp::Lt, x(), Term::int(0))));
        assert_eq!(normalize(&raw), Formula::Atom(Atom::new(x().neg(), Relation::Le)));
    }

    #[test]
    fn ge_moves_constant() {
        let raw = RawFormula::Cmp(CmpOp::Ge, x(), Term::int(1));
        assert_eq!(
            normalize(&raw),
            Formula::Atom(Atom::new(Term::Sum(vec![Term::int(1), x().neg()]), Relation::Le))
        );
    }

    #[test]
    fn disequality_expands() {
        let raw = RawFormula::Not(Box::new(RawFormula::Cmp(CmpOp::Eq, x(), Term::int(0))));
        assert_eq!(
            normalize(&raw),
            Formula::Or(vec![
                Formula::Atom(Atom::new(x(), Relation::Lt)),
                Formula::Atom(Atom::new(x().neg(), Relation::Lt)),
            ])
        );
    }

    #[test]
    fn de_morgan() {
        let raw = RawFormula::Not(Box::new(RawFormula::And(vec![
            RawFormula::Cmp(CmpOp::Gt, x(), Term::int(0)),
            RawFormula::Cmp(CmpOp::Le, x(), Term::int(0)),
        ])));
        assert_eq!(
            normalize(&raw),
            Formula::Or(vec![
                Formula::Atom(Atom::new(x(), Relation::Le)),
                Formula::Atom(Atom::new(x().neg(), Relation::Lt)),
            ])
        );
    }
}
