//! Logic-to-optimization: turns a normalized formula into an ε-relaxed real loss.
//!
//! Atoms map to scalar losses (`=`: `max(|p| - ε, 0)`, `<`: `max(p, -ε)`,
//! `<=`: `max(p, 0)`), conjunctions sum their children and disjunctions take the
//! minimum. Any model of the formula has total loss `<= 0`; the converse does not hold.

use thiserror::Error;

use crate::frontend::{Formula, Relation, Term};

pub type AtomKind = Relation;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum L2oError {
    #[error("non-finite constraint value {0}")]
    NonFiniteInput(f64),
}

/// Per-atom loss map. [`EpsilonRelaxed`] is the default; other relaxations plug in here.
pub trait AtomLoss: Send + Sync {
    fn value(&self, kind: AtomKind, p: f64, epsilon: f64) -> f64;
    /// Scalar `s` with `d loss / dx = s * dp / dx`.
    fn subgrad_factor(&self, kind: AtomKind, p: f64, epsilon: f64) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EpsilonRelaxed;

impl AtomLoss for EpsilonRelaxed {
    #[inline]
    fn value(&self, kind: AtomKind, p: f64, epsilon: f64) -> f64 {
        match kind {
            Relation::Eq => (p.abs() - epsilon).max(0.0),
            Relation::Lt => p.max(-epsilon),
            Relation::Le => p.max(0.0),
        }
    }

    // At a kink the flat branch wins.
    #[inline]
    fn subgrad_factor(&self, kind: AtomKind, p: f64, epsilon: f64) -> f64 {
        match kind {
            Relation::Eq => {
                if p.abs() > epsilon {
                    p.signum()
                } else {
                    0.0
                }
            }
            Relation::Lt => {
                if p > -epsilon {
                    1.0
                } else {
                    0.0
                }
            }
            Relation::Le => {
                if p > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

pub fn atom_loss_value(kind: AtomKind, p: f64, epsilon: f64) -> Result<f64, L2oError> {
    if !p.is_finite() {
        return Err(L2oError::NonFiniteInput(p));
    }
    Ok(EpsilonRelaxed.value(kind, p, epsilon))
}

pub fn atom_loss_subgrad_factor(kind: AtomKind, p: f64, epsilon: f64) -> Result<f64, L2oError> {
    if !p.is_finite() {
        return Err(L2oError::NonFiniteInput(p));
    }
    Ok(EpsilonRelaxed.subgrad_factor(kind, p, epsilon))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossAtom {
    pub id: usize,
    pub kind: AtomKind,
    pub poly: Term,
}

/// Node of the aggregation tree. Children always have smaller indices than their parent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AggNode {
    Leaf(usize),
    Sum(Vec<usize>),
    Min(Vec<usize>),
}

/// Loss specification mirroring a formula: atoms in formula order plus the aggregation tree.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSpec {
    pub atoms: Vec<LossAtom>,
    /// Postorder arena; the root is the last node.
    pub nodes: Vec<AggNode>,
    pub epsilon: f64,
}

/// Structure-preserving translation of a normalized formula.
///
/// # Panics
/// If `epsilon` is negative or NaN.
pub fn build_loss(f: &Formula, epsilon: f64) -> LossSpec {
    assert!(epsilon >= 0.0, "epsilon must be nonnegative, got {epsilon}");
    let mut spec = LossSpec {
        atoms: Vec::new(),
        nodes: Vec::new(),
        epsilon,
    };
    spec.lower(f);
    spec
}

impl LossSpec {
    fn lower(&mut self, f: &Formula) -> usize {
        let node = match f {
            Formula::Atom(a) => {
                let id = self.atoms.len();
                self.atoms.push(LossAtom {
                    id,
                    kind: a.relation,
                    poly: a.poly.clone(),
                });
                AggNode::Leaf(id)
            }
            Formula::And(cs) => AggNode::Sum(cs.iter().map(|c| self.lower(c)).collect()),
            Formula::Or(cs) => AggNode::Min(cs.iter().map(|c| self.lower(c)).collect()),
        };
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn root(&self) -> &AggNode {
        self.nodes.last().expect("loss spec has a root")
    }

    /// True when the tree is a flat sum (or a single leaf): every atom gets weight 1.
    pub fn is_flat_sum(&self) -> bool {
        match self.root() {
            AggNode::Leaf(_) => true,
            AggNode::Sum(cs) => cs.iter().all(|&c| matches!(self.nodes[c], AggNode::Leaf(_))),
            AggNode::Min(_) => false,
        }
    }

    /// Total loss from per-atom residuals `p`, using `node_vals` as scratch.
    pub fn total_with(&self, loss: &dyn AtomLoss, residuals: &[f64], node_vals: &mut Vec<f64>) -> f64 {
        node_vals.clear();
        for node in &self.nodes {
            let v = match node {
                AggNode::Leaf(a) => loss.value(self.atoms[*a].kind, residuals[*a], self.epsilon),
                AggNode::Sum(cs) => cs.iter().map(|&c| node_vals[c]).sum(),
                AggNode::Min(cs) => {
                    let mut best = f64::INFINITY;
                    for &c in cs {
                        // `<` keeps the lowest index on ties and propagates NaN via the final check.
                        if node_vals[c] < best || node_vals[c].is_nan() {
                            best = node_vals[c];
                            if best.is_nan() {
                                break;
                            }
                        }
                    }
                    best
                }
            };
            node_vals.push(v);
        }
        *node_vals.last().unwrap_or(&0.0)
    }

    pub fn total(&self, residuals: &[f64]) -> f64 {
        self.total_with(&EpsilonRelaxed, residuals, &mut Vec::with_capacity(self.nodes.len()))
    }

    /// Writes `d total / d p_atom` for every atom into `factors`.
    ///
    /// `node_vals` must hold the values from the preceding [`LossSpec::total_with`] call.
    /// A `Min` node routes its whole weight to the argmin child (lowest index on ties).
    pub fn factors_with(
        &self,
        loss: &dyn AtomLoss,
        residuals: &[f64],
        node_vals: &[f64],
        weights: &mut Vec<f64>,
        factors: &mut [f64],
    ) {
        weights.clear();
        weights.resize(self.nodes.len(), 0.0);
        if let Some(last) = weights.last_mut() {
            *last = 1.0;
        }
        for idx in (0..self.nodes.len()).rev() {
            let w = weights[idx];
            match &self.nodes[idx] {
                AggNode::Leaf(a) => {
                    let atom = &self.atoms[*a];
                    factors[*a] = if w == 0.0 {
                        0.0
                    } else {
                        w * loss.subgrad_factor(atom.kind, residuals[*a], self.epsilon)
                    };
                }
                AggNode::Sum(cs) => {
                    for &c in cs {
                        weights[c] += w;
                    }
                }
                AggNode::Min(cs) => {
                    if w != 0.0 {
                        let mut arg = cs[0];
                        for &c in &cs[1..] {
                            if node_vals[c] < node_vals[arg] {
                                arg = c;
                            }
                        }
                        weights[arg] += w;
                    }
                }
            }
        }
    }

    /// Loss of the whole formula evaluated with the tree interpreter at `x`.
    pub fn total_at(&self, x: &[f64]) -> Option<f64> {
        let residuals: Option<Vec<f64>> = self
            .atoms
            .iter()
            .map(|a| crate::compiler::eval_tree(&a.poly, x).ok())
            .collect();
        Some(self.total(&residuals?))
    }
}
