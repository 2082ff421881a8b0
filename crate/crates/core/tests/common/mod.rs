//! Random formula construction and independent exact evaluators shared by the integration
//! tests and the acceptance suite.
#![allow(dead_code)]

use gradsat::frontend::{Atom, CmpOp, Formula, RawFormula, Relation, Term};
use gradsat::rational::Rational;
use num::{One, Signed, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

/// Small rationals, so that equalities between random polynomials hold now and then.
pub fn small_rational(rng: &mut ChaCha8Rng) -> Rational {
    const DENOMS: [i64; 4] = [1, 2, 3, 4];
    q(rng.gen_range(-4..=4), DENOMS[rng.gen_range(0..DENOMS.len())])
}

pub fn random_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<Rational> {
    (0..n).map(|_| small_rational(rng)).collect()
}

/// Dyadic point `k / 16` with `|k| <= 16`; exactly representable in binary64.
pub fn dyadic_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<Rational> {
    (0..n).map(|_| q(rng.gen_range(-16..=16), 16)).collect()
}

pub fn to_f64s(point: &[Rational]) -> Vec<f64> {
    point.iter().map(gradsat::rational::to_f64).collect()
}

/// Random polynomial term built with the same smart constructors the parser uses.
pub fn random_term(rng: &mut ChaCha8Rng, depth: u32, nvars: usize) -> Term {
    if depth == 0 || rng.gen_bool(0.3) {
        return if rng.gen_bool(0.6) {
            Term::Var(rng.gen_range(0..nvars))
        } else {
            Term::Const(small_rational(rng))
        };
    }
    match rng.gen_range(0..3) {
        0 => Term::Sum((0..rng.gen_range(2..=3)).map(|_| random_term(rng, depth - 1, nvars)).collect()),
        1 => Term::Product((0..rng.gen_range(2..=3)).map(|_| random_term(rng, depth - 1, nvars)).collect()),
        _ => random_term(rng, depth - 1, nvars).neg(),
    }
}

pub fn random_raw(rng: &mut ChaCha8Rng, depth: u32, nvars: usize) -> RawFormula {
    if depth == 0 || rng.gen_bool(0.25) {
        const OPS: [CmpOp; 5] = [CmpOp::Eq, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];
        let op = OPS[rng.gen_range(0..OPS.len())];
        return RawFormula::Cmp(op, random_term(rng, 2, nvars), random_term(rng, 2, nvars));
    }
    match rng.gen_range(0..3) {
        0 => RawFormula::Not(Box::new(random_raw(rng, depth - 1, nvars))),
        1 => RawFormula::And((0..rng.gen_range(1..=3)).map(|_| random_raw(rng, depth - 1, nvars)).collect()),
        _ => RawFormula::Or((0..rng.gen_range(1..=3)).map(|_| random_raw(rng, depth - 1, nvars)).collect()),
    }
}

/// Exact value of a term, written independently of the library evaluator.
pub fn oracle_term(t: &Term, x: &[Rational]) -> Rational {
    match t {
        Term::Const(c) => c.clone(),
        Term::Var(v) => x[*v].clone(),
        Term::Sum(ts) => ts.iter().fold(Rational::zero(), |acc, c| acc + oracle_term(c, x)),
        Term::Product(ts) => ts.iter().fold(Rational::one(), |acc, c| acc * oracle_term(c, x)),
        Term::Negate(c) => -oracle_term(c, x),
    }
}

/// Truth of a formula as written, comparisons and negations taken literally.
pub fn oracle_raw(f: &RawFormula, x: &[Rational]) -> bool {
    match f {
        RawFormula::Cmp(op, a, b) => {
            let (a, b) = (oracle_term(a, x), oracle_term(b, x));
            match op {
                CmpOp::Eq => a == b,
                CmpOp::Lt => a < b,
                CmpOp::Le => a <= b,
                CmpOp::Gt => a > b,
                CmpOp::Ge => a >= b,
            }
        }
        RawFormula::Not(c) => !oracle_raw(c, x),
        RawFormula::And(cs) => cs.iter().all(|c| oracle_raw(c, x)),
        RawFormula::Or(cs) => cs.iter().any(|c| oracle_raw(c, x)),
    }
}

/// True when the tree contains only And, Or and atoms over `=`, `<`, `<=` and no division
/// (terms have no division node by construction, so only relations are checked).
pub fn is_normal(f: &Formula) -> bool {
    match f {
        Formula::Atom(a) => matches!(a.relation, Relation::Eq | Relation::Lt | Relation::Le),
        Formula::And(cs) | Formula::Or(cs) => !cs.is_empty() && cs.iter().all(is_normal),
    }
}

/// A random atom that holds at `model`.
pub fn true_atom(rng: &mut ChaCha8Rng, model: &[Rational]) -> Atom {
    let p = random_term(rng, 3, model.len());
    let v = oracle_term(&p, model);
    match rng.gen_range(0..3) {
        // p - p(model) = 0
        0 => Atom::new(Term::Sum(vec![p, Term::Const(-v)]), Relation::Eq),
        _ => {
            // Orient so the value at the model is <= 0; strict when it is negative.
            let (p, v) = if v.is_positive() { (p.neg(), -v) } else { (p, v) };
            let rel = if v.is_negative() && rng.gen_bool(0.5) { Relation::Lt } else { Relation::Le };
            Atom::new(p, rel)
        }
    }
}

/// A random atom; may or may not hold at the model.
pub fn any_atom(rng: &mut ChaCha8Rng, nvars: usize) -> Atom {
    const RELS: [Relation; 3] = [Relation::Eq, Relation::Lt, Relation::Le];
    Atom::new(random_term(rng, 3, nvars), RELS[rng.gen_range(0..3)])
}

/// Random And/Or tree that is true at `model`: every conjunct holds and every disjunction
/// has at least one true child.
pub fn planted_formula(rng: &mut ChaCha8Rng, depth: u32, model: &[Rational]) -> Formula {
    if depth == 0 || rng.gen_bool(0.2) {
        return Formula::Atom(true_atom(rng, model));
    }
    let k = rng.gen_range(2..=3);
    if rng.gen_bool(0.5) {
        Formula::And((0..k).map(|_| planted_formula(rng, depth - 1, model)).collect())
    } else {
        let good = rng.gen_range(0..k);
        Formula::Or(
            (0..k)
                .map(|i| {
                    if i == good {
                        planted_formula(rng, depth - 1, model)
                    } else {
                        Formula::Atom(any_atom(rng, model.len()))
                    }
                })
                .collect(),
        )
    }
}

/// Exact truth of a normalized formula, independent of the library evaluator.
pub fn oracle_formula(f: &Formula, x: &[Rational]) -> bool {
    match f {
        Formula::Atom(a) => {
            let v = oracle_term(&a.poly, x);
            match a.relation {
                Relation::Eq => v.is_zero(),
                Relation::Lt => v.is_negative(),
                Relation::Le => !v.is_positive(),
            }
        }
        Formula::And(cs) => cs.iter().all(|c| oracle_formula(c, x)),
        Formula::Or(cs) => cs.iter().any(|c| oracle_formula(c, x)),
    }
}

/// Solver command for external verification: `GRADSAT_VERIFY_CMD`, else `z3 -in` when
/// a `z3` binary is on the path.
pub fn external_solver_command() -> Option<String> {
    if let Ok(cmd) = std::env::var("GRADSAT_VERIFY_CMD") {
        if !cmd.trim().is_empty() {
            return Some(cmd);
        }
    }
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path)
        .map(|d| d.join("z3"))
        .find(|p| p.is_file())
        .map(|p| format!("{} -in", p.display()))
}

/// True when every atom residual, and every pair of competing disjuncts, is at least
/// `margin` away from a point where the loss is not differentiable.
pub fn away_from_kinks(c: &gradsat::compiler::CompiledLoss, x: &[f64], margin: f64) -> bool {
    use gradsat::l2o::AggNode;
    let mut s = c.scratch();
    c.eval_row(x, &mut s);
    let eps = c.epsilon();
    let atoms_ok = c.spec.atoms.iter().zip(&s.residuals).all(|(a, &p)| match a.kind {
        Relation::Eq => p.abs() >= margin && (p.abs() - eps).abs() >= margin,
        Relation::Lt => (p + eps).abs() >= margin,
        Relation::Le => p.abs() >= margin,
    });
    let mut vals = Vec::new();
    c.spec.total_with(c.atom_loss(), &s.residuals, &mut vals);
    let ties_ok = c.spec.nodes.iter().all(|n| match n {
        AggNode::Min(cs) => {
            let mut v: Vec<f64> = cs.iter().map(|&k| vals[k]).collect();
            v.sort_by(f64::total_cmp);
            v.windows(2).next().is_none_or(|w| w[1] - w[0] >= margin)
        }
        _ => true,
    });
    atoms_ok && ties_ok
}

/// `(analytic gradient, central-difference gradient)` of the total loss at `x`.
pub fn gradients(c: &gradsat::compiler::CompiledLoss, x: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let mut s = c.scratch();
    let mut g = vec![0.0; x.len()];
    c.loss_and_grad_row(x, &mut s, &mut g);
    let fd = (0..x.len())
        .map(|j| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += h;
            xm[j] -= h;
            (c.loss_row(&xp, &mut s) - c.loss_row(&xm, &mut s)) / (2.0 * h)
        })
        .collect();
    (g, fd)
}

/// `|g - fd| / |fd|` in the Euclidean norm; the absolute `|g|` when `fd` vanishes.
pub fn relative_error(g: &[f64], fd: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|a| a * a).sum::<f64>().sqrt();
    let diff = norm(&mut g.iter().zip(fd).map(|(a, b)| a - b));
    let base = norm(&mut fd.iter().copied());
    if base == 0.0 {
        norm(&mut g.iter().copied())
    } else {
        diff / base
    }
}
