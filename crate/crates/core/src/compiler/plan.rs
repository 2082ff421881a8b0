use super::monomial::MonomialTable;

/// Per-variable power precomputation shared by every monomial.
///
/// Slots `offset[v] .. offset[v] + max_exp[v]` of the power buffer hold `x_v^1 ..= x_v^max`,
/// so two monomials using the same power of a variable read the same slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PowerPlan {
    pub max_exp: Vec<u32>,
    pub offset: Vec<usize>,
    /// Power slot of every table entry (parallel to `MonomialTable::vars`).
    pub power_index: Vec<u32>,
}

pub fn plan_powers(t: &MonomialTable) -> PowerPlan {
    let mut max_exp = vec![0u32; t.num_vars];
    for (&v, &e) in t.vars.iter().zip(&t.exps) {
        let m = &mut max_exp[v as usize];
        *m = (*m).max(e);
    }
    let mut offset = Vec::with_capacity(t.num_vars + 1);
    let mut acc = 0usize;
    for &m in &max_exp {
        offset.push(acc);
        acc += m as usize;
    }
    offset.push(acc);
    let power_index = t
        .vars
        .iter()
        .zip(&t.exps)
        .map(|(&v, &e)| (offset[v as usize] + e as usize - 1) as u32)
        .collect();
    PowerPlan {
        max_exp,
        offset,
        power_index,
    }
}

impl PowerPlan {
    pub fn num_slots(&self) -> usize {
        *self.offset.last().unwrap_or(&0)
    }

    /// Fills `powers` with `x_v^k` for every planned slot by repeated multiplication.
    #[inline]
    pub fn fill(&self, x: &[f64], powers: &mut [f64]) {
        for (v, &m) in self.max_exp.iter().enumerate() {
            if m == 0 {
                continue;
            }
            let base = self.offset[v];
            let xv = x[v];
            powers[base] = xv;
            for k in 1..m as usize {
                powers[base + k] = powers[base + k - 1] * xv;
            }
        }
    }

    /// Multiplications per sample with the shared power table.
    pub fn mults_per_row(&self, t: &MonomialTable) -> usize {
        let powers: usize = self.max_exp.iter().map(|&m| m.saturating_sub(1) as usize).sum();
        powers + t.vars.len()
    }
}

/// Multiplications per sample when every monomial raises its own powers.
pub fn naive_mults_per_row(t: &MonomialTable) -> usize {
    let powers: usize = t.exps.iter().map(|&e| e as usize - 1).sum();
    powers + t.vars.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_exponents_and_sharing() {
        let mut t = MonomialTable::empty(7);
        t.push_row(0, 2.0, &[(0, 4), (1, 2), (2, 1), (4, 3)]);
        let plan = plan_powers(&t);
        assert_eq!(plan.max_exp, vec![4, 2, 1, 0, 3, 0, 0]);

        t.push_row(0, 13.0, &[(0, 1), (1, 2), (6, 8)]);
        let plan = plan_powers(&t);
        // Both rows read h2^2 from the same slot.
        assert_eq!(plan.power_index[1], plan.power_index[5]);
        assert!(plan.power_index.iter().all(|&s| (s as usize) < plan.num_slots()));
    }

    #[test]
    fn empty_table() {
        let plan = plan_powers(&MonomialTable::empty(3));
        assert_eq!(plan.max_exp, vec![0, 0, 0]);
        assert_eq!(plan.num_slots(), 0);
    }

    #[test]
    fn fill_powers() {
        let mut t = MonomialTable::empty(2);
        t.push_row(0, 1.0, &[(0, 3), (1, 1)]);
        let plan = plan_powers(&t);
        let mut p = vec![0.0; plan.num_slots()];
        plan.fill(&[2.0, -1.5], &mut p);
        assert_eq!(p, vec![2.0, 4.0, 8.0, -1.5]);
    }

    #[test]
    fn multiplication_counts() {
        let mut t = MonomialTable::empty(2);
        t.push_row(0, 1.0, &[(0, 2)]);
        t.push_row(0, 1.0, &[(1, 3)]);
        let plan = plan_powers(&t);
        assert_eq!(plan.mults_per_row(&t), naive_mults_per_row(&t));
        t.push_row(0, 1.0, &[(0, 2), (1, 2)]);
        let plan = plan_powers(&t);
        assert!(plan.mults_per_row(&t) < naive_mults_per_row(&t));
    }
}
