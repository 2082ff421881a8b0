//! Instance generators: random single-polynomial root problems over positive variables,
//! and kissing configurations.

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ToolkitError;

pub const MBO_VARS: [&str; 7] = ["h1", "h2", "h3", "h4", "h5", "h6", "j2"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExpScheme {
    /// N independent uniform picks among h1..h6.
    Multinomial,
    /// Uniform over all ways to split N into six nonnegative parts.
    Composition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MboGenConfig {
    pub products: usize,
    pub degree: u32,
    pub j2_prob: f64,
    pub coeff_lo: i64,
    pub coeff_hi: i64,
    pub neg_prob: f64,
    pub seed: u64,
    pub exp_scheme: ExpScheme,
}

impl Default for MboGenConfig {
    fn default() -> Self {
        MboGenConfig {
            products: 25,
            degree: 5,
            j2_prob: 0.4,
            coeff_lo: 1,
            coeff_hi: 20,
            neg_prob: 0.2,
            seed: 0,
            exp_scheme: ExpScheme::Multinomial,
        }
    }
}

impl MboGenConfig {
    pub fn validate(&self) -> Result<(), ToolkitError> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if self.products == 0 || self.degree == 0 {
            return Err(ToolkitError::InvalidGenerator("products and degree must be positive".into()));
        }
        if !prob(self.j2_prob) || !prob(self.neg_prob) {
            return Err(ToolkitError::InvalidGenerator("probabilities must lie in [0, 1]".into()));
        }
        if self.coeff_lo < 1 || self.coeff_hi < self.coeff_lo {
            return Err(ToolkitError::InvalidGenerator(format!(
                "coefficient range [{}, {}] must satisfy 1 <= lo <= hi",
                self.coeff_lo, self.coeff_hi
            )));
        }
        Ok(())
    }
}

/// One signed product `coeff * h1^e1 ... h6^e6 * j2^j2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MboProduct {
    pub coeff: i64,
    pub h: [u32; 6],
    pub j2: u32,
}

pub fn mbo_products(cfg: &MboGenConfig) -> Result<Vec<MboProduct>, ToolkitError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.degree;
    Ok((0..cfg.products)
        .map(|_| {
            let h = match cfg.exp_scheme {
                ExpScheme::Multinomial => {
                    let mut h = [0u32; 6];
                    for _ in 0..n {
                        h[rng.gen_range(0..6)] += 1;
                    }
                    h
                }
                ExpScheme::Composition => composition(&mut rng, n),
            };
            let j2 = if rng.gen_bool(cfg.j2_prob) { rng.gen_range(1..=n) } else { 0 };
            let mut coeff = rng.gen_range(cfg.coeff_lo..=cfg.coeff_hi);
            if rng.gen_bool(cfg.neg_prob) {
                coeff = -coeff;
            }
            MboProduct { coeff, h, j2 }
        })
        .collect())
}

// Stars and bars: 5 bar positions among n + 5 slots.
fn composition(rng: &mut ChaCha8Rng, n: u32) -> [u32; 6] {
    let slots = n as usize + 5;
    let mut bars = sample(rng, slots, 5).into_vec();
    bars.sort_unstable();
    let mut h = [0u32; 6];
    let mut prev = 0usize;
    for (k, &b) in bars.iter().enumerate() {
        h[k] = (b - prev) as u32;
        prev = b + 1;
    }
    h[5] = (slots - prev) as u32;
    h
}

pub fn gen_mbo(cfg: &MboGenConfig) -> Result<String, ToolkitError> {
    let products = mbo_products(cfg)?;
    let mut used = [false; 7];
    for p in &products {
        for (k, &e) in p.h.iter().enumerate() {
            used[k] |= e > 0;
        }
        used[6] |= p.j2 > 0;
    }
    let mut out = String::from("(set-logic QF_NRA)\n");
    let _ = writeln!(
        out,
        "(set-info :source |gen-mbo products={} degree={} j2_prob={} coeff=[{},{}] neg_prob={} seed={} exp_scheme={:?}|)",
        cfg.products, cfg.degree, cfg.j2_prob, cfg.coeff_lo, cfg.coeff_hi, cfg.neg_prob, cfg.seed, cfg.exp_scheme
    );
    let vars: Vec<&str> = MBO_VARS.iter().zip(used).filter(|(_, u)| *u).map(|(v, _)| *v).collect();
    for v in &vars {
        let _ = writeln!(out, "(declare-fun {v} () Real)");
    }
    let terms: Vec<String> = products.iter().map(product_term).collect();
    let sum = if terms.len() == 1 {
        terms[0].clone()
    } else {
        format!("(+ {})", terms.join(" "))
    };
    let _ = writeln!(out, "(assert (= {sum} 0))");
    for v in &vars {
        let _ = writeln!(out, "(assert (> {v} 0))");
    }
    out.push_str("(check-sat)\n(exit)\n");
    Ok(out)
}

fn product_term(p: &MboProduct) -> String {
    let mut s = if p.coeff < 0 {
        format!("(* (- {})", -p.coeff)
    } else {
        format!("(* {}", p.coeff)
    };
    let powers = p.h.iter().copied().chain([p.j2]);
    for (name, e) in MBO_VARS.iter().zip(powers) {
        for _ in 0..e {
            s.push(' ');
            s.push_str(name);
        }
    }
    s.push(')');
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KissingConfig {
    pub points: usize,
    pub dims: usize,
}

/// `points` unit vectors in `dims` dimensions with pairwise squared distance at least 1.
pub fn gen_kissing(cfg: &KissingConfig) -> Result<String, ToolkitError> {
    if cfg.points == 0 || cfg.dims == 0 {
        return Err(ToolkitError::InvalidGenerator("points and dims must be positive".into()));
    }
    let var = |n: usize, d: usize| format!("x_{n}_{d}");
    let sum = |terms: Vec<String>| {
        if terms.len() == 1 {
            terms.into_iter().next().unwrap_or_default()
        } else {
            format!("(+ {})", terms.join(" "))
        }
    };
    let mut out = String::from("(set-logic QF_NRA)\n");
    let _ = writeln!(out, "(set-info :source |gen-kissing points={} dims={}|)", cfg.points, cfg.dims);
    for n in 0..cfg.points {
        for d in 0..cfg.dims {
            let _ = writeln!(out, "(declare-fun {} () Real)", var(n, d));
        }
    }
    for n in 0..cfg.points {
        let norm = sum((0..cfg.dims).map(|d| format!("(* {0} {0})", var(n, d))).collect());
        let _ = writeln!(out, "(assert (= {norm} 1))");
    }
    for n in 0..cfg.points {
        for m in 0..n {
            let dist = sum(
                (0..cfg.dims)
                    .map(|d| {
                        let diff = format!("(- {} {})", var(n, d), var(m, d));
                        format!("(* {diff} {diff})")
                    })
                    .collect(),
            );
            let _ = writeln!(out, "(assert (>= {dist} 1))");
        }
    }
    out.push_str("(check-sat)\n(exit)\n");
    Ok(out)
}
