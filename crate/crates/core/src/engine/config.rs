use std::time::Duration;

use num::{Signed, Zero};

use super::EngineError;
use crate::compiler::{to_monomials, DEFAULT_CAP};
use crate::l2o::{AggNode, LossSpec};
use crate::frontend::Relation;
use crate::rational::to_f64;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Slack of the relaxed loss.
    pub epsilon: f64,
    /// Box applied to every variable unless `per_var_box` is set.
    pub box_lo: f64,
    pub box_hi: f64,
    pub per_var_box: Option<Vec<(f64, f64)>>,
    /// Shrink the box using top-level atoms of the form `a*x + c ~ 0`.
    pub tighten_box: bool,
    pub max_iters_per_round: u64,
    /// `None` means unbounded.
    pub max_rounds: Option<u64>,
    pub wall_timeout: Option<Duration>,
    pub seed: u64,
    /// Evaluate the batch on the calling thread only.
    pub deterministic: bool,
    pub candidate_threshold: f64,
    /// Candidates are deduplicated after rounding every coordinate to this grid.
    pub dedup_grid: f64,
    pub max_candidates_per_step: usize,
    /// Emit a progress event every this many iterations (0 disables step events).
    pub progress_every: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            batch_size: 10_000,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            epsilon: 1e-4,
            box_lo: -1.0,
            box_hi: 1.0,
            per_var_box: None,
            tighten_box: false,
            max_iters_per_round: 5_000,
            max_rounds: None,
            wall_timeout: Some(Duration::from_secs(600)),
            seed: 0,
            deterministic: false,
            candidate_threshold: 0.0,
            dedup_grid: 1e-6,
            max_candidates_per_step: 8,
            progress_every: 100,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |msg: String| Err(EngineError::InvalidConfig(msg));
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {b}"));
            }
        }
        if !(self.adam_eps >= 0.0) {
            return bad("adam_eps must be nonnegative".into());
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be nonnegative, got {}", self.epsilon));
        }
        if self.max_iters_per_round == 0 {
            return bad("max_iters_per_round must be positive".into());
        }
        if self.max_rounds == Some(0) {
            return bad("max_rounds must be positive".into());
        }
        if !(self.dedup_grid > 0.0) {
            return bad("dedup_grid must be positive".into());
        }
        let check = |lo: f64, hi: f64| lo.is_finite() && hi.is_finite() && lo < hi;
        if !check(self.box_lo, self.box_hi) {
            return bad(format!("box [{}, {}] is empty", self.box_lo, self.box_hi));
        }
        if let Some(b) = &self.per_var_box {
            if let Some((i, _)) = b.iter().enumerate().find(|(_, &(lo, hi))| !check(lo, hi)) {
                return bad(format!("box of variable {i} is empty"));
            }
        }
        Ok(())
    }

    /// Per-variable sampling and projection box for a problem.
    pub fn bounds_for(&self, spec: &LossSpec, num_vars: usize) -> Result<Vec<(f64, f64)>, EngineError> {
        let mut bounds = match &self.per_var_box {
            Some(b) if b.len() == num_vars => b.clone(),
            Some(b) => {
                return Err(EngineError::InvalidConfig(format!(
                    "per-variable box has {} entries for {num_vars} variables",
                    b.len()
                )))
            }
            None => vec![(self.box_lo, self.box_hi); num_vars],
        };
        if self.tighten_box {
            tighten(&mut bounds, spec);
        }
        Ok(bounds)
    }
}

/// Intersects `bounds` with every top-level single-variable linear atom. Atoms stay in the loss.
fn tighten(bounds: &mut [(f64, f64)], spec: &LossSpec) {
    let top: Vec<usize> = match spec.root() {
        AggNode::Leaf(a) => vec![*a],
        AggNode::Sum(cs) => cs
            .iter()
            .filter_map(|&c| match spec.nodes[c] {
                AggNode::Leaf(a) => Some(a),
                _ => None,
            })
            .collect(),
        AggNode::Min(_) => Vec::new(),
    };
    for a in top {
        let atom = &spec.atoms[a];
        let Ok(rows) = to_monomials(&atom.poly, DEFAULT_CAP) else { continue };
        let mut slope = None;
        let mut offset = num::BigRational::zero();
        let mut linear = true;
        for (c, e) in &rows {
            match e.as_slice() {
                [] => offset = c.clone(),
                [(v, 1)] if slope.is_none() => slope = Some((*v as usize, c.clone())),
                _ => linear = false,
            }
        }
        let Some((v, a_coef)) = slope.filter(|_| linear) else { continue };
        let root = to_f64(&(-offset / &a_coef));
        let (lo, hi) = bounds[v];
        let (new_lo, new_hi) = match atom.kind {
            Relation::Eq => (root, root),
            _ if a_coef.is_positive() => (lo, hi.min(root)),
            _ => (lo.max(root), hi),
        };
        // Never produce an empty or degenerate box; the loss still carries the atom.
        if new_lo < new_hi {
            bounds[v] = (new_lo, new_hi);
        }
    }
}
