use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{EngineError, SearchConfig};
use crate::compiler::CompiledLoss;
use crate::matrix::Matrix;

const CHUNK_ROWS: usize = 128;

/// Candidate assignments being optimized together, with their Adam moments.
#[derive(Debug, Clone)]
pub struct BatchState {
    pub x: Matrix,
    pub m: Matrix,
    pub v: Matrix,
    /// Adam step counter shared by the batch.
    pub t: u64,
    /// Running minimum of each batch slot's loss.
    pub best_loss: Vec<f64>,
    /// Loss at `x` from the last evaluation.
    pub loss: Vec<f64>,
    pub grad: Matrix,
    pub bounds: Vec<(f64, f64)>,
    pub rng: ChaCha8Rng,
}

/// Uniform samples from the box, moments zeroed.
pub fn init_batch(cfg: &SearchConfig, bounds: Vec<(f64, f64)>, mut rng: ChaCha8Rng) -> BatchState {
    let n = bounds.len();
    let mut x = Matrix::zeros(cfg.batch_size, n);
    for i in 0..cfg.batch_size {
        sample_row(x.row_mut(i), &bounds, &mut rng);
    }
    BatchState {
        m: Matrix::zeros(cfg.batch_size, n),
        v: Matrix::zeros(cfg.batch_size, n),
        grad: Matrix::zeros(cfg.batch_size, n),
        x,
        t: 0,
        best_loss: vec![f64::INFINITY; cfg.batch_size],
        loss: vec![f64::NAN; cfg.batch_size],
        bounds,
        rng,
    }
}

fn sample_row(row: &mut [f64], bounds: &[(f64, f64)], rng: &mut ChaCha8Rng) {
    for (x, &(lo, hi)) in row.iter_mut().zip(bounds) {
        *x = rng.gen_range(lo..=hi);
    }
}

/// Componentwise clamp of every row into `bounds`.
pub fn project(x: &mut Matrix, bounds: &[(f64, f64)]) {
    let n = bounds.len();
    if n == 0 {
        return;
    }
    for row in x.as_mut_slice().chunks_mut(n) {
        clamp_row(row, bounds);
    }
}

#[inline]
fn clamp_row(row: &mut [f64], bounds: &[(f64, f64)]) {
    for (x, &(lo, hi)) in row.iter_mut().zip(bounds) {
        *x = x.clamp(lo, hi);
    }
}

impl BatchState {
    pub fn batch_size(&self) -> usize {
        self.x.rows()
    }

    pub fn num_vars(&self) -> usize {
        self.x.cols()
    }

    /// Replaces row `i` by a fresh uniform sample with zero moments.
    pub fn resample_row(&mut self, i: usize) {
        sample_row(self.x.row_mut(i), &self.bounds, &mut self.rng);
        self.m.row_mut(i).iter_mut().for_each(|v| *v = 0.0);
        self.v.row_mut(i).iter_mut().for_each(|v| *v = 0.0);
    }

    /// Fresh round: every row resampled, moments and step counter reset.
    pub fn resample_all(&mut self) {
        for i in 0..self.batch_size() {
            self.resample_row(i);
        }
        self.t = 0;
    }

    /// Loss and gradient at the current `x`. Rows whose loss or gradient is not
    /// finite are resampled once and re-evaluated.
    pub fn evaluate(&mut self, c: &CompiledLoss, deterministic: bool) -> Result<(), EngineError> {
        if c.num_vars() != self.num_vars() {
            return Err(EngineError::ShapeMismatch {
                expected: c.num_vars(),
                got: self.num_vars(),
            });
        }
        eval_rows(c, &self.x, &mut self.loss, &mut self.grad, deterministic);
        let bad: Vec<usize> = (0..self.batch_size()).filter(|&i| !row_finite(self, i)).collect();
        if !bad.is_empty() {
            let mut s = c.scratch();
            for &i in &bad {
                self.resample_row(i);
                let (xr, gr) = (self.x.row(i).to_vec(), self.grad.row_mut(i));
                self.loss[i] = c.loss_and_grad_row(&xr, &mut s, gr);
            }
            let still_bad: Vec<usize> = bad.into_iter().filter(|&i| !row_finite(self, i)).collect();
            if still_bad.len() == self.batch_size() {
                return Err(EngineError::NonFiniteLoss);
            }
            for i in still_bad {
                // Excluded from this update; its loss never passes a candidate check.
                self.loss[i] = f64::INFINITY;
                self.grad.row_mut(i).iter_mut().for_each(|g| *g = 0.0);
            }
        }
        for (best, &l) in self.best_loss.iter_mut().zip(&self.loss) {
            if l < *best {
                *best = l;
            }
        }
        Ok(())
    }

    /// One Adam step with bias correction on the stored gradient, then projection.
    pub fn apply_update(&mut self, cfg: &SearchConfig, deterministic: bool) {
        self.t += 1;
        let t = self.t.min(i32::MAX as u64) as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let n = self.num_vars();
        if n == 0 {
            return;
        }
        let bounds = &self.bounds;
        let update = |((x, m), (v, g)): ((&mut [f64], &mut [f64]), (&mut [f64], &[f64]))| {
            for j in 0..x.len() {
                let gj = g[j];
                m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
                v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                x[j] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.adam_eps);
            }
            for row in x.chunks_mut(n) {
                clamp_row(row, bounds);
            }
        };
        let width = n * CHUNK_ROWS;
        let xs = self.x.as_mut_slice();
        let ms = self.m.as_mut_slice();
        let vs = self.v.as_mut_slice();
        let gs = self.grad.as_slice();
        if deterministic {
            xs.chunks_mut(width)
                .zip(ms.chunks_mut(width))
                .zip(vs.chunks_mut(width).zip(gs.chunks(width)))
                .for_each(update);
        } else {
            xs.par_chunks_mut(width)
                .zip(ms.par_chunks_mut(width))
                .zip(vs.par_chunks_mut(width).zip(gs.par_chunks(width)))
                .for_each(update);
        }
    }
}

fn row_finite(s: &BatchState, i: usize) -> bool {
    s.loss[i].is_finite() && s.grad.row(i).iter().all(|g| g.is_finite())
}

fn eval_rows(c: &CompiledLoss, x: &Matrix, loss: &mut [f64], grad: &mut Matrix, deterministic: bool) {
    let n = x.cols();
    if n == 0 {
        let mut s = c.scratch();
        for l in loss.iter_mut() {
            *l = c.loss_row(&[], &mut s);
        }
        return;
    }
    let work = |s: &mut crate::compiler::RowScratch, ((xs, gs), ls): ((&[f64], &mut [f64]), &mut [f64])| {
        for ((xr, gr), l) in xs.chunks(n).zip(gs.chunks_mut(n)).zip(ls.iter_mut()) {
            *l = c.loss_and_grad_row(xr, s, gr);
        }
    };
    let width = n * CHUNK_ROWS;
    if deterministic {
        let mut s = c.scratch();
        x.as_slice()
            .chunks(width)
            .zip(grad.as_mut_slice().chunks_mut(width))
            .zip(loss.chunks_mut(CHUNK_ROWS))
            .for_each(|item| work(&mut s, item));
    } else {
        x.as_slice()
            .par_chunks(width)
            .zip(grad.as_mut_slice().par_chunks_mut(width))
            .zip(loss.par_chunks_mut(CHUNK_ROWS))
            .for_each_init(|| c.scratch(), work);
    }
}

/// Evaluates and updates in one call; returns the losses at the pre-update points.
pub fn step(state: &mut BatchState, c: &CompiledLoss, cfg: &SearchConfig) -> Result<Vec<f64>, EngineError> {
    state.evaluate(c, cfg.deterministic)?;
    let losses = state.loss.clone();
    state.apply_update(cfg, cfg.deterministic);
    Ok(losses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::CompileOptions;
    use crate::frontend::{Atom, Formula, Relation, Term};
    use crate::l2o::build_loss;
    use rand::SeedableRng;

    fn cfg(batch: usize) -> SearchConfig {
        SearchConfig {
            batch_size: batch,
            ..SearchConfig::default()
        }
    }

    fn compiled(poly: Term, rel: Relation, n: usize) -> CompiledLoss {
        let f = Formula::Atom(Atom::new(poly, rel));
        CompiledLoss::new(build_loss(&f, 1e-4), n, CompileOptions::default()).unwrap()
    }

    #[test]
    fn init_range_and_determinism() {
        let c = cfg(3);
        let a = init_batch(&c, vec![(-1.0, 1.0); 2], ChaCha8Rng::seed_from_u64(9));
        assert_eq!((a.x.rows(), a.x.cols()), (3, 2));
        assert!(a.x.as_slice().iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(a.m.as_slice().iter().chain(a.v.as_slice()).all(|&v| v == 0.0));
        assert_eq!(a.t, 0);
        let b = init_batch(&c, vec![(-1.0, 1.0); 2], ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a.x, b.x);
        let tiny = init_batch(&cfg(50), vec![(0.0, 1e-9)], ChaCha8Rng::seed_from_u64(1));
        assert!(tiny.x.as_slice().iter().all(|v| (0.0..=1e-9).contains(v)));
    }

    #[test]
    fn projection() {
        let mut x = Matrix::from_rows(&[vec![1.5], vec![-3.0], vec![0.2]]);
        project(&mut x, &[(-1.0, 1.0)]);
        assert_eq!(x.as_slice(), &[1.0, -1.0, 0.2]);
        let before = x.clone();
        project(&mut x, &[(-1.0, 1.0)]);
        assert_eq!(x, before);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        // 0 * x <= 0 has zero gradient everywhere.
        let c = compiled(Term::Product(vec![Term::int(0), Term::Var(0)]), Relation::Le, 1);
        let conf = cfg(4);
        let mut s = init_batch(&conf, vec![(-1.0, 1.0)], ChaCha8Rng::seed_from_u64(3));
        let before = s.x.clone();
        step(&mut s, &c, &conf).unwrap();
        assert_eq!(s.x, before);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_adam_step_closed_form() {
        // loss = max(x, 0) at x = 0.5: unit gradient, first step moves by lr / (1 + adam_eps).
        let c = compiled(Term::Var(0), Relation::Le, 1);
        let conf = cfg(1);
        let mut s = init_batch(&conf, vec![(-1.0, 1.0)], ChaCha8Rng::seed_from_u64(0));
        s.x.set(0, 0, 0.5);
        let losses = step(&mut s, &c, &conf).unwrap();
        assert_eq!(losses, vec![0.5]);
        let expected = 0.5 - conf.lr * 1.0 / (1.0 + conf.adam_eps);
        assert!((s.x.get(0, 0) - expected).abs() < 1e-15, "{}", s.x.get(0, 0));
    }

    #[test]
    fn edge_stays_on_edge() {
        // max(2 - x, 0) pulls x past the upper edge; projection keeps it at 1.
        let c = compiled(Term::Sum(vec![Term::int(2), Term::Var(0).neg()]), Relation::Le, 1);
        let conf = cfg(1);
        let mut s = init_batch(&conf, vec![(-1.0, 1.0)], ChaCha8Rng::seed_from_u64(0));
        s.x.set(0, 0, 1.0);
        for _ in 0..5 {
            step(&mut s, &c, &conf).unwrap();
            assert_eq!(s.x.get(0, 0), 1.0);
        }
    }

    #[test]
    fn non_finite_rows_are_resampled() {
        // Overflow only far outside the sampling box.
        let huge = Term::Product(vec![Term::Var(0); 400]);
        let c = compiled(huge, Relation::Le, 1);
        let conf = cfg(4);
        let mut s = init_batch(&conf, vec![(-1.0, 1.0)], ChaCha8Rng::seed_from_u64(0));
        s.x.set(2, 0, 1e10);
        s.evaluate(&c, true).unwrap();
        assert!(s.loss.iter().all(|l| l.is_finite()));
        assert!(s.x.get(2, 0).abs() <= 1.0);
    }

    #[test]
    fn all_rows_non_finite_is_an_error() {
        let big = Term::Product(vec![Term::Var(0); 400]);
        let c = compiled(big, Relation::Le, 1);
        let conf = cfg(3);
        let mut s = init_batch(&conf, vec![(1e5, 1e6)], ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(s.evaluate(&c, true), Err(EngineError::NonFiniteLoss)));
    }
}
