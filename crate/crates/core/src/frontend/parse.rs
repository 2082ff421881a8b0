use std::collections::HashMap;

use num::Zero;

use super::ast::{CmpOp, RawFormula, Term};
use super::sexpr::{read_all, SExpr};
use super::ParseError;
use crate::rational::{parse_decimal, Rational};

/// A script as written, before negations and comparison directions are normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct RawProblem {
    pub variables: Vec<String>,
    pub assertions: Vec<RawFormula>,
    pub metadata: Vec<(String, String)>,
    pub declared_logic: Option<String>,
}

#[derive(Debug, Clone)]
enum Value {
    Real(Term),
    Bool(RawFormula),
}

type Scope = HashMap<String, Value>;

struct Elaborator {
    var_index: HashMap<String, usize>,
    globals: Scope,
}

/// Reads the supported SMT-LIB 2 subset into a [`RawProblem`].
pub fn parse_raw(text: &str) -> Result<RawProblem, ParseError> {
    let commands = read_all(text)?;
    let mut problem = RawProblem {
        variables: Vec::new(),
        assertions: Vec::new(),
        metadata: Vec::new(),
        declared_logic: None,
    };
    let mut el = Elaborator {
        var_index: HashMap::new(),
        globals: HashMap::new(),
    };
    for cmd in &commands {
        let items = cmd
            .as_list()
            .filter(|l| !l.is_empty())
            .ok_or_else(|| syntax(format!("expected a command, found `{cmd}`")))?;
        let head = items[0]
            .as_atom()
            .ok_or_else(|| syntax(format!("expected a command name in `{cmd}`")))?;
        match head {
            "set-logic" => {
                let logic = items.get(1).and_then(SExpr::as_atom).ok_or_else(|| syntax("set-logic needs a name"))?;
                problem.declared_logic = Some(logic.to_string());
            }
            "set-info" => {
                let key = items.get(1).and_then(SExpr::as_atom).ok_or_else(|| syntax("set-info needs a keyword"))?;
                let value = match items.get(2) {
                    Some(SExpr::Str(s)) => s.clone(),
                    Some(other) => other.to_string(),
                    None => String::new(),
                };
                problem.metadata.push((key.to_string(), value));
            }
            "declare-fun" => {
                let [_, name, args, sort] = items else {
                    return Err(syntax(format!("malformed declare-fun `{cmd}`")));
                };
                let name = symbol(name)?;
                if !args.as_list().is_some_and(|a| a.is_empty()) {
                    return Err(ParseError::UnsupportedCommand("declare-fun with arguments".into()));
                }
                el.declare(&mut problem, name, sort)?;
            }
            "declare-const" => {
                let [_, name, sort] = items else {
                    return Err(syntax(format!("malformed declare-const `{cmd}`")));
                };
                el.declare(&mut problem, symbol(name)?, sort)?;
            }
            "define-fun" => {
                let [_, name, args, sort, body] = items else {
                    return Err(syntax(format!("malformed define-fun `{cmd}`")));
                };
                let name = symbol(name)?;
                if !args.as_list().is_some_and(|a| a.is_empty()) {
                    return Err(ParseError::UnsupportedCommand("define-fun with arguments".into()));
                }
                let value = el.elaborate(body, &[])?;
                match (sort.as_atom(), &value) {
                    (Some("Real"), Value::Real(_)) | (Some("Bool"), Value::Bool(_)) => {}
                    _ => return Err(ParseError::SortError(format!("definition of `{name}` does not match sort `{sort}`"))),
                }
                if el.var_index.contains_key(name) || el.globals.contains_key(name) {
                    return Err(ParseError::DuplicateDeclaration(name.to_string()));
                }
                el.globals.insert(name.to_string(), value);
            }
            "assert" => {
                let [_, body] = items else {
                    return Err(syntax(format!("malformed assert `{cmd}`")));
                };
                problem.assertions.push(el.formula(body, &[])?);
            }
            "check-sat" | "get-model" => {}
            "exit" => break,
            other => return Err(ParseError::UnsupportedCommand(other.to_string())),
        }
    }
    Ok(problem)
}

fn syntax(msg: impl Into<String>) -> ParseError {
    ParseError::Syntax { line: 0, msg: msg.into() }
}

fn symbol(e: &SExpr) -> Result<&str, ParseError> {
    e.as_atom()
        .filter(|s| !s.starts_with(|c: char| c.is_ascii_digit() || c == ':'))
        .ok_or_else(|| syntax(format!("expected a symbol, found `{e}`")))
}

impl Elaborator {
    fn declare(&mut self, problem: &mut RawProblem, name: &str, sort: &SExpr) -> Result<(), ParseError> {
        if sort.as_atom() != Some("Real") {
            return Err(ParseError::SortError(format!("variable `{name}` has sort `{sort}`, only Real is supported")));
        }
        if self.var_index.contains_key(name) || self.globals.contains_key(name) {
            return Err(ParseError::DuplicateDeclaration(name.to_string()));
        }
        self.var_index.insert(name.to_string(), problem.variables.len());
        problem.variables.push(name.to_string());
        Ok(())
    }

    fn lookup(&self, name: &str, scopes: &[Scope]) -> Option<Value> {
        for scope in scopes.iter().rev() {
            if let Some(v) = scope.get(name) {
                return Some(v.clone());
            }
        }
        if let Some(v) = self.globals.get(name) {
            return Some(v.clone());
        }
        self.var_index.get(name).map(|&i| Value::Real(Term::Var(i)))
    }

    fn term(&self, e: &SExpr, scopes: &[Scope]) -> Result<Term, ParseError> {
        match self.elaborate(e, scopes)? {
            Value::Real(t) => Ok(t),
            Value::Bool(_) => Err(ParseError::SortError(format!("expected a Real term, found boolean `{e}`"))),
        }
    }

    fn formula(&self, e: &SExpr, scopes: &[Scope]) -> Result<RawFormula, ParseError> {
        match self.elaborate(e, scopes)? {
            Value::Bool(f) => Ok(f),
            Value::Real(_) => Err(ParseError::SortError(format!("expected a boolean, found Real term `{e}`"))),
        }
    }

    fn elaborate(&self, e: &SExpr, scopes: &[Scope]) -> Result<Value, ParseError> {
        let items = match e {
            SExpr::Str(_) => return Err(syntax(format!("unexpected string literal `{e}`"))),
            SExpr::Atom(s) => {
                if s.starts_with(|c: char| c.is_ascii_digit()) {
                    let value = parse_decimal(s).ok_or_else(|| syntax(format!("bad numeric literal `{s}`")))?;
                    return Ok(Value::Real(Term::Const(value)));
                }
                return self.lookup(s, scopes).ok_or_else(|| ParseError::UnknownSymbol(s.clone()));
            }
            SExpr::List(items) => items,
        };
        let Some((head, args)) = items.split_first() else {
            return Err(syntax("empty application `()`"));
        };
        let head = head.as_atom().ok_or_else(|| syntax(format!("unsupported application head in `{e}`")))?;
        let arity = |min: usize| -> Result<(), ParseError> {
            if args.len() < min {
                Err(syntax(format!("`{head}` needs at least {min} argument(s) in `{e}`")))
            } else {
                Ok(())
            }
        };
        let terms = |args: &[SExpr]| -> Result<Vec<Term>, ParseError> {
            args.iter().map(|a| self.term(a, scopes)).collect()
        };
        let value = match head {
            "+" => {
                arity(1)?;
                Value::Real(Term::Sum(terms(args)?))
            }
            "*" => {
                arity(1)?;
                Value::Real(Term::Product(terms(args)?))
            }
            "-" => {
                arity(1)?;
                let mut ts = terms(args)?;
                if ts.len() == 1 {
                    Value::Real(ts.pop().expect("one argument").neg())
                } else {
                    let first = ts.remove(0);
                    let mut parts = vec![first];
                    parts.extend(ts.into_iter().map(Term::neg));
                    Value::Real(Term::Sum(parts))
                }
            }
            "/" => {
                arity(2)?;
                let numerator = self.term(&args[0], scopes)?;
                let mut divisor = Rational::from_integer(1.into());
                for a in &args[1..] {
                    match self.term(a, scopes)? {
                        Term::Const(c) if !c.is_zero() => divisor *= c,
                        _ => return Err(ParseError::NonConstantDivisor(e.to_string())),
                    }
                }
                let scale = divisor.recip();
                Value::Real(match numerator {
                    Term::Const(c) => Term::Const(c * scale),
                    t => Term::Product(vec![t, Term::Const(scale)]),
                })
            }
            "=" | "<" | "<=" | ">" | ">=" => {
                arity(2)?;
                let op = match head {
                    "=" => CmpOp::Eq,
                    "<" => CmpOp::Lt,
                    "<=" => CmpOp::Le,
                    ">" => CmpOp::Gt,
                    _ => CmpOp::Ge,
                };
                let ts = terms(args)?;
                let mut chain: Vec<RawFormula> = ts
                    .windows(2)
                    .map(|w| RawFormula::Cmp(op, w[0].clone(), w[1].clone()))
                    .collect();
                Value::Bool(if chain.len() == 1 {
                    chain.pop().expect("one link")
                } else {
                    RawFormula::And(chain)
                })
            }
            "distinct" => {
                arity(2)?;
                let ts = terms(args)?;
                let mut parts = Vec::new();
                for i in 0..ts.len() {
                    for j in i + 1..ts.len() {
                        parts.push(RawFormula::Not(Box::new(RawFormula::Cmp(CmpOp::Eq, ts[i].clone(), ts[j].clone()))));
                    }
                }
                Value::Bool(if parts.len() == 1 {
                    parts.pop().expect("one pair")
                } else {
                    RawFormula::And(parts)
                })
            }
            "not" => {
                if args.len() != 1 {
                    return Err(syntax(format!("`not` takes one argument in `{e}`")));
                }
                Value::Bool(RawFormula::Not(Box::new(self.formula(&args[0], scopes)?)))
            }
            "and" | "or" => {
                arity(1)?;
                let parts = args.iter().map(|a| self.formula(a, scopes)).collect::<Result<Vec<_>, _>>()?;
                Value::Bool(if head == "and" {
                    RawFormula::And(parts)
                } else {
                    RawFormula::Or(parts)
                })
            }
            "let" => {
                let [bindings, body] = args else {
                    return Err(syntax(format!("malformed let `{e}`")));
                };
                let bindings = bindings.as_list().ok_or_else(|| syntax(format!("malformed let bindings in `{e}`")))?;
                // Parallel let: every binding is elaborated in the enclosing scope.
                let mut scope = Scope::new();
                for b in bindings {
                    let pair = b.as_list().filter(|p| p.len() == 2).ok_or_else(|| syntax(format!("malformed let binding `{b}`")))?;
                    let name = symbol(&pair[0])?;
                    scope.insert(name.to_string(), self.elaborate(&pair[1], scopes)?);
                }
                let mut inner = scopes.to_vec();
                inner.push(scope);
                self.elaborate(body, &inner)?
            }
            other => return Err(ParseError::UnknownSymbol(other.to_string())),
        };
        Ok(value)
    }
}
