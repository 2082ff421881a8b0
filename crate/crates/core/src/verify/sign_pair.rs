use std::collections::HashSet;

use num::Zero;

use super::{VerificationOutcome, VerifyError};
use crate::compiler::to_monomials;
use crate::frontend::{and_of, Atom, Formula, ParsedProblem, Relation, Term};
use crate::rational::{from_f64, Rational};

/// A single-equation problem recast as a search for a sign change.
///
/// Variables `0..n` of `problem` are the copy where `f < 0`, variables `n..2n` the copy
/// where `f > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignPairProblem {
    pub base: ParsedProblem,
    pub problem: ParsedProblem,
    /// Left-hand side of the equation `f = 0` over the base variables.
    pub f: Term,
    /// Interval atoms over the base variables.
    pub bounds: Vec<Atom>,
}

impl SignPairProblem {
    pub fn num_base_vars(&self) -> usize {
        self.base.num_vars()
    }

    /// Splits an assignment of the doubled variables into (lower copy, upper copy).
    pub fn split_assignment<'a, T>(&self, x: &'a [T]) -> (&'a [T], &'a [T]) {
        x.split_at(self.num_base_vars())
    }
}

/// The variable of an atom `a*x + c ~ 0` with `a != 0`, i.e. an interval constraint on `x`.
pub fn bound_var(atom: &Atom) -> Option<usize> {
    let rows = to_monomials(&atom.poly, 4).ok()?;
    let mut var = None;
    for (_, e) in &rows {
        match e.as_slice() {
            [] => {}
            [(v, 1)] if var.is_none() => var = Some(*v as usize),
            _ => return None,
        }
    }
    var
}

/// The equation and the bound atoms of an eligible conjunction.
pub(super) fn split(f: &Formula) -> Option<(&Atom, Vec<&Atom>)> {
    let mut eq = None;
    let mut bounds = Vec::new();
    for c in f.conjuncts() {
        let Formula::Atom(a) = c else { return None };
        if a.relation == Relation::Eq {
            if eq.replace(a).is_some() {
                return None;
            }
        } else if bound_var(a).is_some() {
            bounds.push(a);
        } else {
            return None;
        }
    }
    Some((eq?, bounds))
}

pub fn interval_transform(p: &ParsedProblem) -> Result<SignPairProblem, VerifyError> {
    let (eq, bounds) = split(&p.formula).ok_or(VerifyError::NotEligible)?;
    let n = p.num_vars();
    let lower = |t: &Term| t.clone();
    let upper = |t: &Term| t.map_vars(&|v| v + n);
    let mut parts = vec![
        Formula::Atom(Atom::new(lower(&eq.poly), Relation::Lt)),
        Formula::Atom(Atom::new(upper(&eq.poly).neg(), Relation::Lt)),
    ];
    for b in &bounds {
        parts.push(Formula::Atom(Atom::new(lower(&b.poly), b.relation)));
        parts.push(Formula::Atom(Atom::new(upper(&b.poly), b.relation)));
    }
    let mut taken: HashSet<String> = p.variables.iter().cloned().collect();
    let mut fresh = |name: &str, suffix: &str| {
        let mut candidate = format!("{name}{suffix}");
        while taken.contains(&candidate) {
            candidate.push('_');
        }
        taken.insert(candidate.clone());
        candidate
    };
    let mut variables: Vec<String> = p.variables.iter().map(|v| fresh(v, "_lo")).collect();
    variables.extend(p.variables.iter().map(|v| fresh(v, "_hi")).collect::<Vec<_>>());
    let mut metadata = p.metadata.clone();
    metadata.push((":gradsat-transform".into(), "sign-pair".into()));
    Ok(SignPairProblem {
        base: p.clone(),
        problem: ParsedProblem {
            variables,
            formula: and_of(parts),
            metadata,
            declared_logic: p.declared_logic.clone(),
        },
        f: eq.poly.clone(),
        bounds: bounds.into_iter().cloned().collect(),
    })
}

/// Exact sign-change check on an assignment of the doubled variables.
pub fn check_sign_pair(assignment: &[f64], f: &Term, bounds: &[Atom]) -> VerificationOutcome {
    if !assignment.len().is_multiple_of(2) || bounds.iter().any(|b| bound_var(b).is_none()) {
        return VerificationOutcome::Spurious;
    }
    let Some(point) = assignment.iter().map(|&x| from_f64(x)).collect::<Option<Vec<Rational>>>() else {
        return VerificationOutcome::Spurious;
    };
    let (lo, hi) = point.split_at(point.len() / 2);
    let inside = |x: &[Rational]| {
        bounds
            .iter()
            .all(|b| b.poly.eval_exact(x).is_some_and(|v| b.relation.holds(&v)))
    };
    let sign = |x: &[Rational]| f.eval_exact(x);
    match (sign(lo), sign(hi)) {
        (Some(a), Some(b)) if a < Rational::zero() && b > Rational::zero() && inside(lo) && inside(hi) => {
            VerificationOutcome::SatByIVT {
                lower: lo.to_vec(),
                upper: hi.to_vec(),
            }
        }
        _ => VerificationOutcome::Spurious,
    }
}
