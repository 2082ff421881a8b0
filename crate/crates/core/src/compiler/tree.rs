//! Tree interpreters: the recursive reference evaluator and a flattened tape with
//! reverse-mode gradients, used for atoms too large to expand into monomials.

use crate::frontend::{EvalError, Term};
use crate::rational::to_f64;

/// Recursive evaluation of `p` in binary64 arithmetic.
pub fn eval_tree(p: &Term, x: &[f64]) -> Result<f64, EvalError> {
    Ok(match p {
        Term::Const(c) => to_f64(c),
        Term::Var(v) => *x.get(*v).ok_or(EvalError::MissingVariable {
            missing: *v,
            given: x.len(),
        })?,
        Term::Sum(ts) => {
            let mut acc = 0.0;
            for t in ts {
                acc += eval_tree(t, x)?;
            }
            acc
        }
        Term::Product(ts) => {
            let mut acc = 1.0;
            for t in ts {
                acc *= eval_tree(t, x)?;
            }
            acc
        }
        Term::Negate(t) => -eval_tree(t, x)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    Var(u32),
    Sum { start: u32, len: u32 },
    Product { start: u32, len: u32 },
    Neg(u32),
}

/// Postorder tape of one term; the root is the last node.
#[derive(Debug, Clone, PartialEq)]
pub struct Tape {
    ops: Vec<Op>,
    children: Vec<u32>,
}

/// Scratch buffers for [`Tape`] evaluation.
#[derive(Debug, Default, Clone)]
pub struct TapeScratch {
    vals: Vec<f64>,
    adj: Vec<f64>,
    suffix: Vec<f64>,
}

impl Tape {
    pub fn new(t: &Term) -> Tape {
        let mut tape = Tape {
            ops: Vec::new(),
            children: Vec::new(),
        };
        tape.push(t);
        tape
    }

    fn push(&mut self, t: &Term) -> u32 {
        let op = match t {
            Term::Const(c) => Op::Const(to_f64(c)),
            Term::Var(v) => Op::Var(*v as u32),
            Term::Negate(inner) => Op::Neg(self.push(inner)),
            Term::Sum(ts) | Term::Product(ts) => {
                let ids: Vec<u32> = ts.iter().map(|c| self.push(c)).collect();
                let start = self.children.len() as u32;
                self.children.extend(ids);
                let len = ts.len() as u32;
                if matches!(t, Term::Sum(_)) {
                    Op::Sum { start, len }
                } else {
                    Op::Product { start, len }
                }
            }
        };
        self.ops.push(op);
        (self.ops.len() - 1) as u32
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    fn kids(&self, start: u32, len: u32) -> &[u32] {
        &self.children[start as usize..(start + len) as usize]
    }

    /// Evaluates the tape; node values stay in `s` for a following [`Tape::backward`].
    pub fn forward(&self, x: &[f64], s: &mut TapeScratch) -> f64 {
        s.vals.clear();
        for op in &self.ops {
            let v = match *op {
                Op::Const(c) => c,
                Op::Var(i) => x[i as usize],
                Op::Neg(c) => -s.vals[c as usize],
                Op::Sum { start, len } => {
                    let mut acc = 0.0;
                    for &c in self.kids(start, len) {
                        acc += s.vals[c as usize];
                    }
                    acc
                }
                Op::Product { start, len } => {
                    let mut acc = 1.0;
                    for &c in self.kids(start, len) {
                        acc *= s.vals[c as usize];
                    }
                    acc
                }
            };
            s.vals.push(v);
        }
        *s.vals.last().unwrap_or(&0.0)
    }

    /// Adds `seed * d root / d x` into `grad`. Requires a preceding [`Tape::forward`] on the same point.
    pub fn backward(&self, seed: f64, s: &mut TapeScratch, grad: &mut [f64]) {
        let n = self.ops.len();
        s.adj.clear();
        s.adj.resize(n, 0.0);
        if n == 0 {
            return;
        }
        s.adj[n - 1] = seed;
        for idx in (0..n).rev() {
            let a = s.adj[idx];
            if a == 0.0 {
                continue;
            }
            match self.ops[idx] {
                Op::Const(_) => {}
                Op::Var(i) => grad[i as usize] += a,
                Op::Neg(c) => s.adj[c as usize] -= a,
                Op::Sum { start, len } => {
                    for k in 0..len {
                        let c = self.children[(start + k) as usize];
                        s.adj[c as usize] += a;
                    }
                }
                Op::Product { start, len } => {
                    // Prefix/suffix products: no division, safe at zero factors.
                    let kids = &self.children[start as usize..(start + len) as usize];
                    s.suffix.clear();
                    s.suffix.resize(kids.len() + 1, 1.0);
                    for k in (0..kids.len()).rev() {
                        s.suffix[k] = s.suffix[k + 1] * s.vals[kids[k] as usize];
                    }
                    let mut prefix = 1.0;
                    for (k, &c) in kids.iter().enumerate() {
                        s.adj[c as usize] += a * prefix * s.suffix[k + 1];
                        prefix *= s.vals[c as usize];
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::Rational;

    #[test]
    fn reference_values() {
        let sphere = Term::Sum(vec![
            Term::Product(vec![Term::Var(0), Term::Var(0)]),
            Term::Product(vec![Term::Var(1), Term::Var(1)]),
            Term::int(-1),
        ]);
        assert_eq!(eval_tree(&sphere, &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(eval_tree(&Term::Const(Rational::new(7.into(), 2.into())), &[]).unwrap(), 3.5);
        assert_eq!(eval_tree(&Term::Negate(Box::new(Term::Var(0))), &[-2.0]).unwrap(), 2.0);
        assert!(eval_tree(&Term::Var(2), &[0.0]).is_err());
    }

    #[test]
    fn tape_gradient_at_zero_factor() {
        // x * y at (0, 3) → gradient (3, 0).
        let t = Term::Product(vec![Term::Var(0), Term::Var(1)]);
        let tape = Tape::new(&t);
        let mut s = TapeScratch::default();
        assert_eq!(tape.forward(&[0.0, 3.0], &mut s), 0.0);
        let mut g = [0.0; 2];
        tape.backward(1.0, &mut s, &mut g);
        assert_eq!(g, [3.0, 0.0]);
    }

    #[test]
    fn tape_matches_tree() {
        let t = Term::Sum(vec![
            Term::Product(vec![Term::Sum(vec![Term::Var(0), Term::int(2)]), Term::Var(1).neg(), Term::Var(0)]),
            Term::Const(Rational::new(1.into(), 3.into())),
        ]);
        let tape = Tape::new(&t);
        let mut s = TapeScratch::default();
        let x = [0.7, -1.3];
        assert_eq!(tape.forward(&x, &mut s), eval_tree(&t, &x).unwrap());
        let mut g = [0.0; 2];
        tape.backward(2.0, &mut s, &mut g);
        // d/dx0 [-(x0+2) x0 x1] = -(2 x0 + 2) x1 ; d/dx1 = -(x0+2) x0
        assert!((g[0] - 2.0 * (-(2.0 * 0.7 + 2.0) * -1.3)).abs() < 1e-12);
        assert!((g[1] - 2.0 * (-(0.7 + 2.0) * 0.7)).abs() < 1e-12);
    }
}
