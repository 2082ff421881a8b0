//! Sound checking of search candidates.
//!
//! Formulas without equalities are checked exactly over rationals. Equalities cannot be
//! met exactly by floats, so those candidates become a bounded query for an external
//! solver. Single-equation problems over interval domains can instead be recast as a
//! search for a sign change, which is again checked exactly.

mod exact;
mod external;
mod sign_pair;

use thiserror::Error;

pub use exact::check_exact;
pub use external::{emit_bounded_query, parse_command, run_external, ExternalSolver};
pub use sign_pair::{bound_var, check_sign_pair, interval_transform, SignPairProblem};

use crate::frontend::{Formula, ParsedProblem, Relation};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq)]
pub enum VerificationOutcome {
    /// Exact model of the formula.
    Verified(Vec<Rational>),
    Spurious,
    /// No external solver configured; carries the query that would decide the candidate.
    NeedsExternal(String),
    /// External solver answered `sat`; carries its output after the first line.
    ExternalSat(String),
    ExternalUnsatOrUnknown,
    /// `f(lower) < 0 < f(upper)` with both points inside the bound region.
    SatByIVT { lower: Vec<Rational>, upper: Vec<Rational> },
}

impl VerificationOutcome {
    pub fn is_sat(&self) -> bool {
        matches!(
            self,
            VerificationOutcome::Verified(_) | VerificationOutcome::ExternalSat(_) | VerificationOutcome::SatByIVT { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyPath {
    ExactInequality,
    NeedsExternal,
    SignPairEligible,
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("formula contains equality atoms; exact checking does not apply")]
    HasEquality,
    #[error("delta must be positive and finite, got {0}")]
    InvalidDelta(f64),
    #[error("assignment has {got} values for {expected} variables")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("assignment contains a non-finite value")]
    NonFiniteAssignment,
    #[error("problem is not a single equation over interval bounds")]
    NotEligible,
    #[error("could not run verifier `{command}`: {source}")]
    SpawnFailure {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unexpected verifier output: {0:?}")]
    ProtocolError(String),
    #[error("empty verifier command")]
    EmptyCommand,
}

pub fn classify(p: &ParsedProblem) -> VerifyPath {
    let atoms = p.formula.atoms();
    let eqs = atoms.iter().filter(|a| a.relation == Relation::Eq).count();
    if eqs == 0 {
        return VerifyPath::ExactInequality;
    }
    if eqs == 1 && sign_pair::split(&p.formula).is_some() {
        return VerifyPath::SignPairEligible;
    }
    VerifyPath::NeedsExternal
}

pub(crate) fn has_equality(f: &Formula) -> bool {
    f.atoms().iter().any(|a| a.relation == Relation::Eq)
}

/// Candidate checking for one problem, with an optional external solver.
#[derive(Debug, Clone)]
pub struct Verifier {
    pub external: Option<ExternalSolver>,
    pub delta: f64,
}

impl Default for Verifier {
    fn default() -> Self {
        Verifier {
            external: None,
            delta: 1e-3,
        }
    }
}

impl Verifier {
    /// Decides a candidate of `p` given as binary floats in variable order.
    pub fn verify(&self, p: &ParsedProblem, assignment: &[f64]) -> Result<VerificationOutcome, VerifyError> {
        if assignment.len() != p.num_vars() {
            return Err(VerifyError::ShapeMismatch {
                expected: p.num_vars(),
                got: assignment.len(),
            });
        }
        if !has_equality(&p.formula) {
            return check_exact(assignment, &p.formula);
        }
        let query = emit_bounded_query(p, assignment, self.delta)?;
        match &self.external {
            Some(solver) => solver.run(&query),
            None => Ok(VerificationOutcome::NeedsExternal(query)),
        }
    }
}
