use std::fmt::Write as _;

use super::ToolkitError;
use crate::compiler::{CompileOptions, CompiledLoss};
use crate::engine::{search, Candidate, Progress, SearchConfig, SearchStats, Verdict};
use crate::frontend::ParsedProblem;
use crate::l2o::build_loss;
use crate::rational::{smt_literal, Rational};
use crate::verify::{check_sign_pair, classify, interval_transform, VerificationOutcome, Verifier, VerifyPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Direct,
    Interval,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Direct => "direct",
            Mode::Interval => "interval",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub search: SearchConfig,
    pub mode: Mode,
    pub verifier: Verifier,
    pub compile: CompileOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            search: SearchConfig::default(),
            mode: Mode::Direct,
            verifier: Verifier::default(),
            compile: CompileOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Sat,
    Unknown,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Mode that was run; interval requests fall back to direct when ineligible.
    pub mode: Mode,
    /// Variables of the searched problem (doubled in interval mode).
    pub variables: Vec<String>,
    /// Last verification outcome, if any candidate was checked.
    pub outcome: Option<VerificationOutcome>,
    /// Candidate that produced `outcome`.
    pub candidate: Option<Candidate>,
    pub stats: SearchStats,
}

impl SolveReport {
    /// `name=value` pairs of the candidate, `;`-separated, values in shortest round-trip form.
    pub fn model_column(&self) -> String {
        match &self.candidate {
            Some(c) if self.status == SolveStatus::Sat => self
                .variables
                .iter()
                .zip(&c.assignment)
                .map(|(n, v)| format!("{n}={v:?}"))
                .collect::<Vec<_>>()
                .join(";"),
            _ => String::new(),
        }
    }

    /// Text printed by `solve`: `sat` plus a model or witnesses, or `unknown`.
    pub fn render(&self, base: &ParsedProblem) -> String {
        let mut out = String::new();
        match (&self.status, &self.outcome) {
            (SolveStatus::Sat, Some(VerificationOutcome::Verified(model))) => {
                out.push_str("sat\n");
                write_model(&mut out, "model", &base.variables, model);
            }
            (SolveStatus::Sat, Some(VerificationOutcome::SatByIVT { lower, upper })) => {
                out.push_str("sat\n; the equation changes sign between the two witnesses\n");
                write_model(&mut out, "lower-witness", &base.variables, lower);
                write_model(&mut out, "upper-witness", &base.variables, upper);
            }
            (SolveStatus::Sat, Some(VerificationOutcome::ExternalSat(model))) => {
                out.push_str("sat\n");
                if let Some(c) = &self.candidate {
                    out.push_str("; candidate\n");
                    for (n, v) in base.variables.iter().zip(&c.assignment) {
                        let _ = writeln!(out, ";   {n} = {v:?}");
                    }
                }
                if !model.trim().is_empty() {
                    out.push_str(model.trim_end());
                    out.push('\n');
                }
            }
            _ => out.push_str("unknown\n"),
        }
        out
    }
}

fn write_model(out: &mut String, head: &str, names: &[String], values: &[Rational]) {
    let _ = writeln!(out, "({head}");
    for (n, v) in names.iter().zip(values) {
        let _ = writeln!(out, "  (define-fun {} () Real {})", crate::frontend::sexpr::quote_symbol(n), smt_literal(v));
    }
    out.push_str(")\n");
}

/// Searches for a model of `p` and verifies candidates soundly.
///
/// A candidate that would need an external solver while none is configured ends the
/// search with status unknown; the pending query is kept in `outcome`.
pub fn solve(
    p: &ParsedProblem,
    opts: &SolveOptions,
    progress: impl FnMut(&Progress),
) -> Result<SolveReport, ToolkitError> {
    if opts.mode == Mode::Interval && classify(p) == VerifyPath::SignPairEligible {
        let sp = interval_transform(p)?;
        let c = compile(&sp.problem, opts)?;
        let outcome = search(
            &c,
            &opts.search,
            |cand| match check_sign_pair(&cand.assignment, &sp.f, &sp.bounds) {
                VerificationOutcome::Spurious => Verdict::Reject,
                sat => Verdict::Accept((sat, cand.clone())),
            },
            progress,
        )?;
        return report(outcome.accepted.map(|(o, c)| (Ok(o), c)), outcome.stats, Mode::Interval, &sp.problem);
    }
    let c = compile(p, opts)?;
    let outcome = search(
        &c,
        &opts.search,
        |cand| match opts.verifier.verify(p, &cand.assignment) {
            Ok(VerificationOutcome::Spurious) | Ok(VerificationOutcome::ExternalUnsatOrUnknown) => Verdict::Reject,
            other => Verdict::Accept((other, cand.clone())),
        },
        progress,
    )?;
    report(outcome.accepted, outcome.stats, Mode::Direct, p)
}

fn compile(p: &ParsedProblem, opts: &SolveOptions) -> Result<CompiledLoss, ToolkitError> {
    opts.search.validate()?;
    let spec = build_loss(&p.formula, opts.search.epsilon);
    Ok(CompiledLoss::new(spec, p.num_vars(), opts.compile)?)
}

type Accepted = (Result<VerificationOutcome, crate::verify::VerifyError>, Candidate);

fn report(accepted: Option<Accepted>, stats: SearchStats, mode: Mode, searched: &ParsedProblem) -> Result<SolveReport, ToolkitError> {
    let (outcome, candidate) = match accepted {
        Some((o, c)) => (Some(o?), Some(c)),
        None => (None, None),
    };
    let status = if outcome.as_ref().is_some_and(|o| o.is_sat()) {
        SolveStatus::Sat
    } else {
        SolveStatus::Unknown
    };
    Ok(SolveReport {
        status,
        mode,
        variables: searched.variables.clone(),
        outcome,
        candidate,
        stats,
    })
}
