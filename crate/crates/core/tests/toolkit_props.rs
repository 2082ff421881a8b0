mod common;

use common::*;
use gradsat::frontend::{parse_script, Relation};
use gradsat::rational::{from_f64, Rational};
use gradsat::toolkit::{
    gen_kissing, gen_mbo, mbo_products, run_bench, run_cli, BenchConfig, ExpScheme, KissingConfig, MboGenConfig,
    Mode, SolveOptions, CSV_HEADER,
};
use num::Signed;
use proptest::prelude::*;
use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::time::Duration;

fn scheme() -> impl Strategy<Value = ExpScheme> {
    prop_oneof![Just(ExpScheme::Multinomial), Just(ExpScheme::Composition)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mbo_instances_are_well_formed(products in 1usize..=30, degree in 1u32..=8, seed in any::<u64>(), exp_scheme in scheme()) {
        let cfg = MboGenConfig { products, degree, seed, exp_scheme, ..MboGenConfig::default() };
        let text = gen_mbo(&cfg).unwrap();
        prop_assert_eq!(gen_mbo(&cfg).unwrap(), text.clone());
        let p = parse_script(&text).unwrap();
        let atoms = p.formula.atoms();
        prop_assert_eq!(atoms.iter().filter(|a| a.relation == Relation::Eq).count(), 1);
        // One positivity atom per declared variable.
        prop_assert_eq!(atoms.iter().filter(|a| a.relation == Relation::Lt).count(), p.num_vars());
        for prod in mbo_products(&cfg).unwrap() {
            prop_assert_eq!(prod.h.iter().sum::<u32>(), degree);
            prop_assert!((cfg.coeff_lo..=cfg.coeff_hi).contains(&prod.coeff.abs()));
        }
    }

    #[test]
    fn kissing_instances_are_well_formed(points in 1usize..=6, dims in 1usize..=4) {
        let p = parse_script(&gen_kissing(&KissingConfig { points, dims }).unwrap()).unwrap();
        prop_assert_eq!(p.num_vars(), points * dims);
        let atoms = p.formula.atoms();
        prop_assert_eq!(atoms.iter().filter(|a| a.relation == Relation::Eq).count(), points);
        prop_assert_eq!(atoms.iter().filter(|a| a.relation == Relation::Le).count(), points * (points - 1) / 2);
    }
}

fn parse_model(column: &str) -> HashMap<String, f64> {
    column
        .split(';')
        .filter(|s| !s.is_empty())
        .map(|kv| {
            let (k, v) = kv.split_once('=').unwrap();
            (k.to_string(), v.parse().unwrap())
        })
        .collect()
}

fn exact(x: f64) -> Rational {
    from_f64(x).unwrap()
}

/// Re-checks one sat CSV row against its instance with exact arithmetic.
fn row_is_sound(instance: &Path, mode: &str, model: &HashMap<String, f64>) -> bool {
    let p = parse_script(&fs::read_to_string(instance).unwrap()).unwrap();
    match mode {
        "direct" => {
            let x: Vec<Rational> = p.variables.iter().map(|v| exact(model[v])).collect();
            oracle_formula(&p.formula, &x)
        }
        "interval" => {
            let lo: Vec<Rational> = p.variables.iter().map(|v| exact(model[&format!("{v}_lo")])).collect();
            let hi: Vec<Rational> = p.variables.iter().map(|v| exact(model[&format!("{v}_hi")])).collect();
            let atoms = p.formula.atoms();
            let eq = atoms.iter().find(|a| a.relation == Relation::Eq).unwrap();
            let bounds_hold = |x: &[Rational]| {
                atoms.iter().filter(|a| a.relation != Relation::Eq).all(|a| {
                    let v = oracle_term(&a.poly, x);
                    if a.relation == Relation::Lt { v.is_negative() } else { !v.is_positive() }
                })
            };
            let (fl, fh) = (oracle_term(&eq.poly, &lo), oracle_term(&eq.poly, &hi));
            fl.is_negative() && fh.is_positive() && bounds_hold(&lo) && bounds_hold(&hi)
        }
        _ => false,
    }
}

fn read_rows(path: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(path).unwrap();
    assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), CSV_HEADER.to_vec());
    r.records().map(Result::unwrap).collect()
}

#[test]
fn reported_sat_rows_are_sound() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst");
    fs::create_dir(&inst).unwrap();
    let ineqs = [
        "(declare-fun x () Real)(declare-fun y () Real)(assert (< (+ (* x x) (* y y)) (/ 1 4)))(assert (> (* x y) 0))",
        "(declare-fun x () Real)(assert (or (< x (- 2)) (and (> x (/ 1 2)) (<= (* x x x) (/ 1 5)))))",
        "(declare-fun x () Real)(assert (< (* x x) 0))",
    ];
    for (i, t) in ineqs.iter().enumerate() {
        fs::write(inst.join(format!("ineq{i}.smt2")), t).unwrap();
    }
    for seed in 0..4 {
        let cfg = MboGenConfig { products: 8, degree: 3, seed, ..MboGenConfig::default() };
        fs::write(inst.join(format!("mbo{seed}.smt2")), gen_mbo(&cfg).unwrap()).unwrap();
    }
    let mut opts = SolveOptions { mode: Mode::Interval, ..SolveOptions::default() };
    opts.search.batch_size = 1000;
    opts.search.max_rounds = Some(2);
    opts.search.max_iters_per_round = 300;
    opts.search.wall_timeout = Some(Duration::from_secs(30));
    let csv_path = dir.path().join("out.csv");
    let records = run_bench(&inst, &BenchConfig { solve: opts, jobs: 2 }, &csv_path).unwrap();
    let rows = read_rows(&csv_path);
    assert_eq!(rows.len(), records.len());
    assert!(rows.windows(2).all(|w| w[0][0] < w[1][0]), "rows not in name order");
    let mut sat = 0;
    for row in &rows {
        if &row[2] == "sat" {
            sat += 1;
            assert!(row_is_sound(Path::new(&row[0]), &row[1], &parse_model(&row[9])), "{row:?}");
        } else {
            assert!(row[9].is_empty());
        }
    }
    assert!(sat >= 2, "{rows:?}");
    let unsat = rows.iter().find(|r| r[0].ends_with("ineq2.smt2")).unwrap();
    assert_eq!(&unsat[2], "unknown");
}

#[test]
fn cli_generates_and_solves() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("k.smt2");
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let args = ["gradsat", "gen-kissing", "--points", "2", "--dims", "2", "-o", file.to_str().unwrap()];
    assert_eq!(run_cli(args, &mut out, &mut err), 0);
    assert!(parse_script(&fs::read_to_string(&file).unwrap()).is_ok());

    let lt = dir.path().join("lt.smt2");
    fs::write(&lt, "(declare-fun x () Real)(assert (< x (- (/ 1 2))))").unwrap();
    out.clear();
    let args = ["gradsat", "solve", lt.to_str().unwrap(), "--batch", "100", "--timeout", "20s"];
    assert_eq!(run_cli(args, &mut out, &mut err), 0);
    let text = String::from_utf8(out.clone()).unwrap();
    assert!(text.starts_with("sat"), "{text}");

    out.clear();
    let missing = dir.path().join("missing.smt2");
    let args = ["gradsat", "solve", missing.to_str().unwrap()];
    assert_eq!(run_cli(args, &mut out, &mut err), 2);

    out.clear();
    let args = ["gradsat", "gen-mbo", "--products", "3", "--degree", "2", "--seed", "4"];
    assert_eq!(run_cli(args, &mut out, &mut err), 0);
    let expected = gen_mbo(&MboGenConfig { products: 3, degree: 2, seed: 4, ..MboGenConfig::default() }).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), expected);
}
