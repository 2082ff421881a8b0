use super::{has_equality, VerificationOutcome, VerifyError};
use crate::frontend::{eval_bool_exact, Formula};
use crate::rational::{from_f64, Rational};

/// Exact check of an equality-free formula at the binary value of each coordinate.
pub fn check_exact(assignment: &[f64], f: &Formula) -> Result<VerificationOutcome, VerifyError> {
    if has_equality(f) {
        return Err(VerifyError::HasEquality);
    }
    let Some(point) = assignment.iter().map(|&x| from_f64(x)).collect::<Option<Vec<Rational>>>() else {
        return Ok(VerificationOutcome::Spurious);
    };
    let expected = f.atoms().iter().filter_map(|a| a.poly.max_var()).max().map_or(0, |v| v + 1);
    match eval_bool_exact(f, &point) {
        Ok(true) => Ok(VerificationOutcome::Verified(point)),
        Ok(false) => Ok(VerificationOutcome::Spurious),
        Err(_) => Err(VerifyError::ShapeMismatch {
            expected,
            got: assignment.len(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{Atom, Relation, Term};

    fn atom(poly: Term, r: Relation) -> Formula {
        Formula::Atom(Atom::new(poly, r))
    }

    #[test]
    fn strictness_and_exact_values() {
        let lt = atom(Term::Var(0), Relation::Lt);
        assert!(matches!(check_exact(&[-0.5], &lt).unwrap(), VerificationOutcome::Verified(_)));
        assert_eq!(check_exact(&[0.0], &lt).unwrap(), VerificationOutcome::Spurious);

        let sq = atom(
            Term::Sum(vec![Term::Product(vec![Term::Var(0), Term::Var(0)]), Term::int(-1)]),
            Relation::Le,
        );
        let VerificationOutcome::Verified(m) = check_exact(&[0.5], &sq).unwrap() else { panic!() };
        assert_eq!(m, vec![Rational::new(1.into(), 2.into())]);
    }

    #[test]
    fn tiny_violation_is_caught() {
        // (1 + 1e-17) - 1 rounds to 0 in floats but is positive exactly.
        let f = atom(
            Term::Sum(vec![Term::Var(0), Term::Var(1), Term::Var(2).neg()]),
            Relation::Le,
        );
        let out = check_exact(&[1.0, 1e-17, 1.0], &f).unwrap();
        assert_eq!(out, VerificationOutcome::Spurious);
    }

    #[test]
    fn refuses_equalities_and_non_finite() {
        let eq = atom(Term::Var(0), Relation::Eq);
        assert!(matches!(check_exact(&[0.0], &eq), Err(VerifyError::HasEquality)));
        let lt = atom(Term::Var(0), Relation::Lt);
        assert_eq!(check_exact(&[f64::NEG_INFINITY], &lt).unwrap(), VerificationOutcome::Spurious);
    }
}
