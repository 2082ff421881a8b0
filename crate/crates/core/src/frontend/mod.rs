//! SMT-LIB 2 front end: reading scripts, normalizing to `p ~ 0` atoms, exact evaluation
//! and printing back to the supported subset.

mod ast;
mod normalize;
mod parse;
mod print;
pub mod sexpr;

use thiserror::Error;

pub use ast::{Atom, CmpOp, Formula, RawFormula, Relation, Term};
pub use normalize::{normalize, normalize_all};
pub use parse::{parse_raw, RawProblem};
pub use print::{formula_to_smt, term_to_smt};

pub(crate) use normalize::and as and_of;
pub(crate) use print::problem_to_smt;

use crate::rational::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error (line {line}): {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unsupported command `{0}`")]
    UnsupportedCommand(String),
    #[error("division by a non-constant or zero divisor in `{0}`")]
    NonConstantDivisor(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("sort error: {0}")]
    SortError(String),
    #[error("symbol `{0}` declared twice")]
    DuplicateDeclaration(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("assignment has {given} values but variable {missing} is referenced")]
    MissingVariable { missing: usize, given: usize },
}

/// A normalized problem: the conjunction of all assertions over declared Real variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedProblem {
    /// Variable names; the position is the ordinal used by [`Term::Var`].
    pub variables: Vec<String>,
    pub formula: Formula,
    pub metadata: Vec<(String, String)>,
    pub declared_logic: Option<String>,
}

impl ParsedProblem {
    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn from_raw(raw: RawProblem) -> ParsedProblem {
        ParsedProblem {
            formula: normalize_all(&raw.assertions),
            variables: raw.variables,
            metadata: raw.metadata,
            declared_logic: raw.declared_logic,
        }
    }

    /// Renders the problem as a script in the supported subset, one `assert` per top-level conjunct.
    pub fn to_smtlib(&self) -> String {
        print::problem_to_smt(self, true)
    }
}

/// Parses and normalizes a script.
pub fn parse_script(text: &str) -> Result<ParsedProblem, ParseError> {
    Ok(ParsedProblem::from_raw(parse_raw(text)?))
}

/// Evaluates `f` exactly at a rational point.
pub fn eval_bool_exact(f: &Formula, point: &[Rational]) -> Result<bool, EvalError> {
    Ok(match f {
        Formula::Atom(a) => {
            let value = a.poly.eval_exact(point).ok_or_else(|| missing(&a.poly, point.len()))?;
            a.relation.holds(&value)
        }
        Formula::And(cs) => {
            for c in cs {
                if !eval_bool_exact(c, point)? {
                    return Ok(false);
                }
            }
            true
        }
        Formula::Or(cs) => {
            for c in cs {
                if eval_bool_exact(c, point)? {
                    return Ok(true);
                }
            }
            false
        }
    })
}

fn missing(t: &Term, given: usize) -> EvalError {
    EvalError::MissingVariable {
        missing: t.max_var().unwrap_or(0),
        given,
    }
}
