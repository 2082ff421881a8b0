use std::fmt::Write;

use super::ast::{Formula, Term};
use super::sexpr::quote_symbol;
use super::ParsedProblem;
use crate::rational::smt_literal;

pub fn term_to_smt(t: &Term, names: &[String]) -> String {
    let mut out = String::new();
    write_term(&mut out, t, names);
    out
}

fn write_term(out: &mut String, t: &Term, names: &[String]) {
    match t {
        Term::Const(c) => out.push_str(&smt_literal(c)),
        Term::Var(v) => match names.get(*v) {
            Some(n) => out.push_str(&quote_symbol(n)),
            None => {
                let _ = write!(out, "|v{v}|");
            }
        },
        Term::Sum(ts) | Term::Product(ts) => {
            out.push_str(if matches!(t, Term::Sum(_)) { "(+" } else { "(*" });
            for c in ts {
                out.push(' ');
                write_term(out, c, names);
            }
            out.push(')');
        }
        Term::Negate(inner) => {
            out.push_str("(- ");
            write_term(out, inner, names);
            out.push(')');
        }
    }
}

pub fn formula_to_smt(f: &Formula, names: &[String]) -> String {
    let mut out = String::new();
    write_formula(&mut out, f, names);
    out
}

fn write_formula(out: &mut String, f: &Formula, names: &[String]) {
    match f {
        Formula::Atom(a) => {
            let _ = write!(out, "({} ", a.relation.smt_op());
            write_term(out, &a.poly, names);
            out.push_str(" 0)");
        }
        Formula::And(cs) | Formula::Or(cs) if cs.is_empty() => {
            // Only reachable for hand-built formulas; the empty conjunction is true.
            out.push_str(if matches!(f, Formula::And(_)) { "(<= 0 0)" } else { "(< 0 0)" });
        }
        Formula::And(cs) | Formula::Or(cs) => {
            out.push_str(if matches!(f, Formula::And(_)) { "(and" } else { "(or" });
            for c in cs {
                out.push(' ');
                write_formula(out, c, names);
            }
            out.push(')');
        }
    }
}

fn info_value(v: &str) -> String {
    let simple = !v.is_empty() && !v.contains(|c: char| c.is_whitespace() || "()\"|;".contains(c));
    if simple {
        v.to_string()
    } else {
        format!("\"{}\"", v.replace('"', "\"\""))
    }
}

pub(crate) fn problem_to_smt(p: &ParsedProblem, footer: bool) -> String {
    let mut out = String::new();
    if let Some(logic) = &p.declared_logic {
        let _ = writeln!(out, "(set-logic {logic})");
    }
    for (k, v) in &p.metadata {
        let _ = writeln!(out, "(set-info {k} {})", info_value(v));
    }
    for name in &p.variables {
        let _ = writeln!(out, "(declare-fun {} () Real)", quote_symbol(name));
    }
    for c in p.formula.conjuncts() {
        if matches!(c, Formula::And(cs) if cs.is_empty()) {
            continue;
        }
        let _ = writeln!(out, "(assert {})", formula_to_smt(c, &p.variables));
    }
    if footer {
        out.push_str("(check-sat)\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::parse_script;

    #[test]
    fn prints_supported_subset() {
        let src = "(set-logic QF_NRA)(set-info :source |two words|)(declare-fun x () Real)(assert (> (* x (/ 1 3)) (- 2)))";
        let p = parse_script(src).unwrap();
        let text = p.to_smtlib();
        assert!(text.contains("(set-info :source \"two words\")"), "{text}");
        assert!(text.contains("(assert (< (+ (- 2.0) (- (* x (/ 1 3)))) 0))"), "{text}");
        assert_eq!(parse_script(&text).unwrap(), p);
    }
}
