use std::collections::BTreeMap;
use std::ops::Range;

use num::{One, Zero};

use super::CompileError;
use crate::frontend::Term;
use crate::l2o::LossSpec;
use crate::rational::{to_f64, Rational};

/// Sparse exponent vector: `(variable, exponent)` pairs sorted by variable, exponents > 0.
pub type Exponents = Vec<(u32, u32)>;

type Poly = BTreeMap<Exponents, Rational>;

pub const DEFAULT_CAP: usize = 100_000;

/// Expands `p` into `(coefficient, exponents)` rows with like terms merged and zeros dropped.
///
/// Fails with [`CompileError::CapExceeded`] as soon as an intermediate expansion holds
/// more than `cap` monomials.
pub fn to_monomials(p: &Term, cap: usize) -> Result<Vec<(Rational, Exponents)>, CompileError> {
    let poly = expand(p, cap)?;
    Ok(poly.into_iter().filter(|(_, c)| !c.is_zero()).map(|(e, c)| (c, e)).collect())
}

fn expand(t: &Term, cap: usize) -> Result<Poly, CompileError> {
    Ok(match t {
        Term::Const(c) => {
            let mut p = Poly::new();
            if !c.is_zero() {
                p.insert(Vec::new(), c.clone());
            }
            p
        }
        Term::Var(v) => {
            let mut p = Poly::new();
            p.insert(vec![(*v as u32, 1)], Rational::one());
            p
        }
        Term::Negate(inner) => {
            let mut p = expand(inner, cap)?;
            for c in p.values_mut() {
                *c = -c.clone();
            }
            p
        }
        Term::Sum(ts) => {
            let mut acc = Poly::new();
            for t in ts {
                for (e, c) in expand(t, cap)? {
                    add_term(&mut acc, e, c);
                }
                check_cap(&acc, cap)?;
            }
            acc
        }
        Term::Product(ts) => {
            let mut acc = Poly::new();
            acc.insert(Vec::new(), Rational::one());
            for t in ts {
                let rhs = expand(t, cap)?;
                acc = multiply(&acc, &rhs, cap)?;
                if acc.is_empty() {
                    break;
                }
            }
            acc
        }
    })
}

fn add_term(p: &mut Poly, e: Exponents, c: Rational) {
    use std::collections::btree_map::Entry;
    match p.entry(e) {
        Entry::Vacant(v) => {
            v.insert(c);
        }
        Entry::Occupied(mut o) => {
            *o.get_mut() += c;
            if o.get().is_zero() {
                o.remove();
            }
        }
    }
}

fn check_cap(p: &Poly, cap: usize) -> Result<(), CompileError> {
    if p.len() > cap {
        Err(CompileError::CapExceeded { cap })
    } else {
        Ok(())
    }
}

fn multiply(a: &Poly, b: &Poly, cap: usize) -> Result<Poly, CompileError> {
    let mut out = Poly::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            add_term(&mut out, merge_exponents(ea, eb), ca * cb);
        }
        check_cap(&out, cap)?;
    }
    Ok(out)
}

fn merge_exponents(a: &[(u32, u32)], b: &[(u32, u32)]) -> Exponents {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push((a[i].0, a[i].1 + b[j].1));
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// All constraint polynomials of a loss as one sparse table (CSR layout).
///
/// Rows are grouped by owning atom in atom order; atoms routed to the tree fallback own no rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialTable {
    pub num_vars: usize,
    pub coeffs: Vec<f64>,
    /// `row_start[r]..row_start[r + 1]` indexes `vars`/`exps` for row `r`.
    pub row_start: Vec<usize>,
    pub vars: Vec<u32>,
    pub exps: Vec<u32>,
    pub owner: Vec<usize>,
    pub atom_rows: Vec<Range<usize>>,
}

impl MonomialTable {
    pub fn empty(num_vars: usize) -> MonomialTable {
        MonomialTable {
            num_vars,
            coeffs: Vec::new(),
            row_start: vec![0],
            vars: Vec::new(),
            exps: Vec::new(),
            owner: Vec::new(),
            atom_rows: Vec::new(),
        }
    }

    /// Expands every atom of `spec`; atoms over the cap are returned as fallback ids.
    pub fn from_spec(spec: &LossSpec, num_vars: usize, cap: usize) -> (MonomialTable, Vec<usize>) {
        let mut table = MonomialTable::empty(num_vars);
        let mut fallback = Vec::new();
        for atom in &spec.atoms {
            let start = table.num_rows();
            match to_monomials(&atom.poly, cap) {
                Ok(rows) => {
                    for (c, e) in rows {
                        table.push_row(atom.id, to_f64(&c), &e);
                    }
                }
                Err(CompileError::CapExceeded { .. }) => fallback.push(atom.id),
                Err(_) => unreachable!("expansion only fails on the cap"),
            }
            table.atom_rows.push(start..table.num_rows());
        }
        (table, fallback)
    }

    pub fn push_row(&mut self, owner: usize, coeff: f64, exps: &[(u32, u32)]) {
        self.coeffs.push(coeff);
        self.owner.push(owner);
        for &(v, e) in exps {
            debug_assert!(e > 0);
            self.vars.push(v);
            self.exps.push(e);
        }
        self.row_start.push(self.vars.len());
    }

    pub fn num_rows(&self) -> usize {
        self.coeffs.len()
    }

    pub fn row_entries(&self, r: usize) -> Range<usize> {
        self.row_start[r]..self.row_start[r + 1]
    }

    /// Dense exponent row over all variables.
    pub fn dense_exponents(&self, r: usize) -> Vec<u32> {
        let mut out = vec![0; self.num_vars];
        for k in self.row_entries(r) {
            out[self.vars[k] as usize] = self.exps[k];
        }
        out
    }
}
