//! Compiles a loss specification into a sparse monomial table with a shared power plan,
//! and evaluates values and gradients for whole batches of candidate points.
//!
//! Per sample the kernel builds `x_v^1 ..= x_v^max` for every variable, gathers the
//! needed powers for each monomial, multiplies them with the coefficient and sums the
//! monomials of each atom in row order. Atoms whose expansion exceeds the row cap are
//! evaluated by a flattened tree interpreter instead. Every sample row is reduced in a
//! fixed order, so splitting the batch across threads does not change any output bit.

mod monomial;
mod plan;
mod tree;

use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

pub use monomial::{to_monomials, Exponents, MonomialTable, DEFAULT_CAP};
pub use plan::{naive_mults_per_row, plan_powers, PowerPlan};
pub use tree::{eval_tree, Tape, TapeScratch};

use crate::l2o::{AtomLoss, EpsilonRelaxed, LossSpec};
use crate::matrix::Matrix;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompileError {
    #[error("monomial expansion exceeds {cap} rows")]
    CapExceeded { cap: usize },
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("variable {var} out of range for {num_vars} variables")]
    VariableOutOfRange { var: usize, num_vars: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct CompileOptions {
    /// Maximum monomial rows per atom before falling back to the tree interpreter.
    pub cap: usize,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions { cap: DEFAULT_CAP }
    }
}

#[derive(Clone)]
pub struct CompiledLoss {
    pub table: MonomialTable,
    pub plan: PowerPlan,
    pub spec: LossSpec,
    /// Atom ids evaluated by the tree interpreter.
    pub fallback: Vec<usize>,
    tapes: Vec<Option<Tape>>,
    num_vars: usize,
    atom_loss: Arc<dyn AtomLoss>,
}

impl std::fmt::Debug for CompiledLoss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CompiledLoss")
            .field("num_vars", &self.num_vars)
            .field("atoms", &self.spec.num_atoms())
            .field("rows", &self.table.num_rows())
            .field("fallback", &self.fallback)
            .finish()
    }
}

/// Per-thread buffers for the row kernels.
#[derive(Debug, Default, Clone)]
pub struct RowScratch {
    pub powers: Vec<f64>,
    /// Constraint values `p_atom(x)` of the last evaluated row.
    pub residuals: Vec<f64>,
    pub factors: Vec<f64>,
    node_vals: Vec<f64>,
    weights: Vec<f64>,
    suffix: Vec<f64>,
    tape: TapeScratch,
}

impl CompiledLoss {
    pub fn new(spec: LossSpec, num_vars: usize, opts: CompileOptions) -> Result<CompiledLoss, CompileError> {
        Self::with_atom_loss(spec, num_vars, opts, Arc::new(EpsilonRelaxed))
    }

    pub fn with_atom_loss(
        spec: LossSpec,
        num_vars: usize,
        opts: CompileOptions,
        atom_loss: Arc<dyn AtomLoss>,
    ) -> Result<CompiledLoss, CompileError> {
        for atom in &spec.atoms {
            if let Some(var) = atom.poly.max_var().filter(|&v| v >= num_vars) {
                return Err(CompileError::VariableOutOfRange { var, num_vars });
            }
        }
        let (table, fallback) = MonomialTable::from_spec(&spec, num_vars, opts.cap);
        let plan = plan_powers(&table);
        let mut tapes = vec![None; spec.num_atoms()];
        for &a in &fallback {
            tapes[a] = Some(Tape::new(&spec.atoms[a].poly));
        }
        Ok(CompiledLoss {
            table,
            plan,
            spec,
            fallback,
            tapes,
            num_vars,
            atom_loss,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_atoms(&self) -> usize {
        self.spec.num_atoms()
    }

    pub fn epsilon(&self) -> f64 {
        self.spec.epsilon
    }

    pub fn atom_loss(&self) -> &dyn AtomLoss {
        self.atom_loss.as_ref()
    }

    pub fn scratch(&self) -> RowScratch {
        RowScratch {
            powers: vec![0.0; self.plan.num_slots()],
            residuals: vec![0.0; self.num_atoms()],
            factors: vec![0.0; self.num_atoms()],
            ..RowScratch::default()
        }
    }

    /// Constraint values of one sample into `s.residuals`.
    pub fn eval_row(&self, x: &[f64], s: &mut RowScratch) {
        self.plan.fill(x, &mut s.powers);
        let t = &self.table;
        let pidx = &self.plan.power_index;
        for a in 0..self.num_atoms() {
            s.residuals[a] = match &self.tapes[a] {
                Some(tape) => tape.forward(x, &mut s.tape),
                None => {
                    let mut acc = 0.0;
                    for r in t.atom_rows[a].clone() {
                        let mut m = t.coeffs[r];
                        for k in t.row_start[r]..t.row_start[r + 1] {
                            m *= s.powers[pidx[k] as usize];
                        }
                        acc += m;
                    }
                    acc
                }
            };
        }
    }

    /// Adds `Σ_atoms s.factors[a] · ∇p_a(x)` into `grad`.
    ///
    /// Uses the powers and tape values of the preceding [`CompiledLoss::eval_row`] on `x`.
    pub fn accumulate_grad_row(&self, x: &[f64], s: &mut RowScratch, grad: &mut [f64]) {
        let t = &self.table;
        let pidx = &self.plan.power_index;
        for a in 0..self.num_atoms() {
            let f = s.factors[a];
            if f == 0.0 {
                continue;
            }
            if let Some(tape) = &self.tapes[a] {
                // Tape values were overwritten by later atoms; recompute this one.
                tape.forward(x, &mut s.tape);
                tape.backward(f, &mut s.tape, grad);
                continue;
            }
            for r in t.atom_rows[a].clone() {
                let (k0, k1) = (t.row_start[r], t.row_start[r + 1]);
                let c = f * t.coeffs[r];
                match k1 - k0 {
                    0 => {}
                    1 => {
                        grad[t.vars[k0] as usize] += c * f64::from(t.exps[k0]) * lower_power(&s.powers, t, pidx, k0);
                    }
                    n => {
                        s.suffix.clear();
                        s.suffix.resize(n + 1, 1.0);
                        for j in (0..n).rev() {
                            s.suffix[j] = s.suffix[j + 1] * s.powers[pidx[k0 + j] as usize];
                        }
                        let mut prefix = c;
                        for j in 0..n {
                            let k = k0 + j;
                            let d = f64::from(t.exps[k]) * lower_power(&s.powers, t, pidx, k);
                            grad[t.vars[k] as usize] += prefix * d * s.suffix[j + 1];
                            prefix *= s.powers[pidx[k] as usize];
                        }
                    }
                }
            }
        }
    }

    /// Total loss at `x`; leaves residuals and per-atom factors in `s` and writes the gradient into `grad`.
    pub fn loss_and_grad_row(&self, x: &[f64], s: &mut RowScratch, grad: &mut [f64]) -> f64 {
        self.eval_row(x, s);
        let loss = self.spec.total_with(self.atom_loss.as_ref(), &s.residuals, &mut s.node_vals);
        self.spec
            .factors_with(self.atom_loss.as_ref(), &s.residuals, &s.node_vals, &mut s.weights, &mut s.factors);
        grad.iter_mut().for_each(|g| *g = 0.0);
        self.accumulate_grad_row(x, s, grad);
        loss
    }

    /// Total loss at `x` without the gradient.
    pub fn loss_row(&self, x: &[f64], s: &mut RowScratch) -> f64 {
        self.eval_row(x, s);
        self.spec.total_with(self.atom_loss.as_ref(), &s.residuals, &mut s.node_vals)
    }

    fn check_batch(&self, x: &Matrix) -> Result<(), CompileError> {
        if x.cols() != self.num_vars {
            return Err(CompileError::ShapeMismatch {
                expected: format!("{} columns", self.num_vars),
                got: format!("{} columns", x.cols()),
            });
        }
        Ok(())
    }
}

// x_v^(e-1) read from the power table; e - 1 = 0 gives 1.
#[inline]
fn lower_power(powers: &[f64], t: &MonomialTable, pidx: &[u32], k: usize) -> f64 {
    if t.exps[k] == 1 {
        1.0
    } else {
        powers[pidx[k] as usize - 1]
    }
}

/// Minimum rows per rayon task.
const CHUNK_ROWS: usize = 256;

/// Per-atom constraint values for every sample: `[batch × atoms]`.
pub fn eval_compiled(c: &CompiledLoss, x: &Matrix) -> Result<Matrix, CompileError> {
    eval_compiled_with(c, x, true)
}

pub fn eval_compiled_with(c: &CompiledLoss, x: &Matrix, parallel: bool) -> Result<Matrix, CompileError> {
    c.check_batch(x)?;
    let n_atoms = c.num_atoms();
    let mut out = Matrix::zeros(x.rows(), n_atoms);
    if n_atoms == 0 || x.rows() == 0 {
        return Ok(out);
    }
    let nv = c.num_vars.max(1);
    let work = |(xs, os): (&[f64], &mut [f64]), s: &mut RowScratch| {
        for (xr, or) in xs.chunks(nv).zip(os.chunks_mut(n_atoms)) {
            c.eval_row(xr, s);
            or.copy_from_slice(&s.residuals);
        }
    };
    let xs = x.as_slice();
    if parallel {
        xs.par_chunks(nv * CHUNK_ROWS)
            .zip(out.as_mut_slice().par_chunks_mut(n_atoms * CHUNK_ROWS))
            .for_each_init(|| c.scratch(), |s, pair| work(pair, s));
    } else {
        let mut s = c.scratch();
        work((xs, out.as_mut_slice()), &mut s);
    }
    Ok(out)
}

/// `Σ_atoms factors[i, a] · ∇p_a(x_i)` for every sample: `[batch × vars]`.
pub fn grad_compiled(c: &CompiledLoss, x: &Matrix, factors: &Matrix) -> Result<Matrix, CompileError> {
    c.check_batch(x)?;
    if factors.rows() != x.rows() || factors.cols() != c.num_atoms() {
        return Err(CompileError::ShapeMismatch {
            expected: format!("{}x{} factors", x.rows(), c.num_atoms()),
            got: format!("{}x{}", factors.rows(), factors.cols()),
        });
    }
    let nv = c.num_vars;
    let mut out = Matrix::zeros(x.rows(), nv);
    if nv == 0 || x.rows() == 0 {
        return Ok(out);
    }
    let na = c.num_atoms().max(1);
    out.as_mut_slice()
        .par_chunks_mut(nv * CHUNK_ROWS)
        .zip(x.as_slice().par_chunks(nv * CHUNK_ROWS))
        .zip(factors.as_slice().par_chunks(na * CHUNK_ROWS))
        .for_each_init(
            || c.scratch(),
            |s, ((gs, xs), fs)| {
                for ((g, xr), fr) in gs.chunks_mut(nv).zip(xs.chunks(nv)).zip(fs.chunks(na)) {
                    c.eval_row(xr, s);
                    s.factors[..fr.len()].copy_from_slice(&fr[..c.num_atoms()]);
                    c.accumulate_grad_row(xr, s, g);
                }
            },
        );
    Ok(out)
}
