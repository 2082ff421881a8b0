use num::{Signed, Zero};

use crate::rational::Rational;

/// Polynomial expression over real variables. Constants are exact rationals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Const(Rational),
    /// Variable ordinal, i.e. its position in declaration order.
    Var(usize),
    Sum(Vec<Term>),
    Product(Vec<Term>),
    Negate(Box<Term>),
}

impl Term {
    pub fn constant(value: impl Into<Rational>) -> Term {
        Term::Const(value.into())
    }

    pub fn int(value: i64) -> Term {
        Term::Const(Rational::from_integer(value.into()))
    }

    pub fn is_zero_const(&self) -> bool {
        matches!(self, Term::Const(c) if c.is_zero())
    }

    /// Negation that folds constants and cancels double negation.
    pub fn neg(self) -> Term {
        match self {
            Term::Const(c) => Term::Const(-c),
            Term::Negate(inner) => *inner,
            t => Term::Negate(Box::new(t)),
        }
    }

    /// `a - b`, without introducing a node when either side is the literal zero.
    pub fn difference(a: Term, b: Term) -> Term {
        if b.is_zero_const() {
            a
        } else if a.is_zero_const() {
            b.neg()
        } else {
            Term::Sum(vec![a, b.neg()])
        }
    }

    /// Renumbers every variable through `map`.
    pub fn map_vars(&self, map: &impl Fn(usize) -> usize) -> Term {
        match self {
            Term::Const(c) => Term::Const(c.clone()),
            Term::Var(v) => Term::Var(map(*v)),
            Term::Sum(ts) => Term::Sum(ts.iter().map(|t| t.map_vars(map)).collect()),
            Term::Product(ts) => Term::Product(ts.iter().map(|t| t.map_vars(map)).collect()),
            Term::Negate(t) => Term::Negate(Box::new(t.map_vars(map))),
        }
    }

    /// Exact evaluation; `None` when an ordinal is out of range of `point`.
    pub fn eval_exact(&self, point: &[Rational]) -> Option<Rational> {
        Some(match self {
            Term::Const(c) => c.clone(),
            Term::Var(v) => point.get(*v)?.clone(),
            Term::Sum(ts) => {
                let mut acc = Rational::zero();
                for t in ts {
                    acc += t.eval_exact(point)?;
                }
                acc
            }
            Term::Product(ts) => {
                let mut acc = Rational::from_integer(1.into());
                for t in ts {
                    acc *= t.eval_exact(point)?;
                }
                acc
            }
            Term::Negate(t) => -t.eval_exact(point)?,
        })
    }

    pub fn max_var(&self) -> Option<usize> {
        match self {
            Term::Const(_) => None,
            Term::Var(v) => Some(*v),
            Term::Sum(ts) | Term::Product(ts) => ts.iter().filter_map(Term::max_var).max(),
            Term::Negate(t) => t.max_var(),
        }
    }

    pub fn for_each_var(&self, f: &mut impl FnMut(usize)) {
        match self {
            Term::Const(_) => {}
            Term::Var(v) => f(*v),
            Term::Sum(ts) | Term::Product(ts) => ts.iter().for_each(|t| t.for_each_var(f)),
            Term::Negate(t) => t.for_each_var(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Eq,
    Lt,
    Le,
}

impl Relation {
    pub fn holds(self, value: &Rational) -> bool {
        match self {
            Relation::Eq => value.is_zero(),
            Relation::Lt => value.is_negative(),
            Relation::Le => !value.is_positive(),
        }
    }

    pub fn smt_op(self) -> &'static str {
        match self {
            Relation::Eq => "=",
            Relation::Lt => "<",
            Relation::Le => "<=",
        }
    }
}

/// `poly ~ 0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub poly: Term,
    pub relation: Relation,
}

impl Atom {
    pub fn new(poly: Term, relation: Relation) -> Atom {
        Atom { poly, relation }
    }
}

/// Negation-free boolean structure over atoms.
///
/// `And(vec![])` is the empty conjunction (true); it only appears for scripts without assertions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Atom(Atom),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

impl Formula {
    /// Atoms in left-to-right order.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            Formula::Atom(a) => out.push(a),
            Formula::And(cs) | Formula::Or(cs) => cs.iter().for_each(|c| c.collect_atoms(out)),
        }
    }

    pub fn map_atoms(&self, f: &impl Fn(&Atom) -> Formula) -> Formula {
        match self {
            Formula::Atom(a) => f(a),
            Formula::And(cs) => Formula::And(cs.iter().map(|c| c.map_atoms(f)).collect()),
            Formula::Or(cs) => Formula::Or(cs.iter().map(|c| c.map_atoms(f)).collect()),
        }
    }

    /// Top-level conjuncts: the children of a root `And`, or the formula itself.
    pub fn conjuncts(&self) -> Vec<&Formula> {
        match self {
            Formula::And(cs) => cs.iter().collect(),
            other => vec![other],
        }
    }
}

/// Comparison operators accepted before normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
}

/// Boolean structure as written in the script, before negations are pushed down.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RawFormula {
    Cmp(CmpOp, Term, Term),
    Not(Box<RawFormula>),
    And(Vec<RawFormula>),
    Or(Vec<RawFormula>),
}
