use std::fmt::Write as _;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use super::{VerificationOutcome, VerifyError};
use crate::frontend::sexpr::quote_symbol;
use crate::frontend::{problem_to_smt, ParsedProblem};
use crate::rational::{from_f64, from_f64_decimal, smt_literal};

/// The problem restricted to the box `[c_i - delta, c_i + delta]` around a candidate.
pub fn emit_bounded_query(p: &ParsedProblem, assignment: &[f64], delta: f64) -> Result<String, VerifyError> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(VerifyError::InvalidDelta(delta));
    }
    if assignment.len() != p.num_vars() {
        return Err(VerifyError::ShapeMismatch {
            expected: p.num_vars(),
            got: assignment.len(),
        });
    }
    let d = from_f64_decimal(delta).ok_or(VerifyError::InvalidDelta(delta))?;
    let mut out = String::new();
    if p.declared_logic.is_none() {
        out.push_str("(set-logic QF_NRA)\n");
    }
    out.push_str(&problem_to_smt(p, false));
    for (name, &x) in p.variables.iter().zip(assignment) {
        let c = from_f64(x).ok_or(VerifyError::NonFiniteAssignment)?;
        let name = quote_symbol(name);
        let _ = writeln!(out, "(assert (<= {} {name}))", smt_literal(&(&c - &d)));
        let _ = writeln!(out, "(assert (<= {name} {}))", smt_literal(&(&c + &d)));
    }
    out.push_str("(check-sat)\n(get-model)\n");
    Ok(out)
}

/// Splits a command line into an argv template, honoring shell-style quotes.
pub fn parse_command(line: &str) -> Result<Vec<String>, VerifyError> {
    match shlex::split(line) {
        Some(argv) if !argv.is_empty() => Ok(argv),
        _ => Err(VerifyError::EmptyCommand),
    }
}

/// Runs an external solver on `query`.
///
/// Arguments containing `{query}` get the path of a temporary file holding the query;
/// without such an argument the query is written to standard input. The process is
/// killed once `timeout` elapses.
pub fn run_external(argv: &[String], query: &str, timeout: Duration) -> Result<VerificationOutcome, VerifyError> {
    let (program, rest) = argv.split_first().ok_or(VerifyError::EmptyCommand)?;
    let via_file = argv.iter().any(|a| a.contains("{query}"));
    let file = if via_file {
        let mut f = tempfile::Builder::new()
            .prefix("gradsat-")
            .suffix(".smt2")
            .tempfile()
            .map_err(|e| spawn_err(program, e))?;
        f.write_all(query.as_bytes()).map_err(|e| spawn_err(program, e))?;
        f.flush().map_err(|e| spawn_err(program, e))?;
        Some(f)
    } else {
        None
    };
    let path = file.as_ref().map(|f| f.path().display().to_string()).unwrap_or_default();
    let args: Vec<String> = rest.iter().map(|a| a.replace("{query}", &path)).collect();
    let mut child = Command::new(program.replace("{query}", &path))
        .args(&args)
        .stdin(if via_file { Stdio::null() } else { Stdio::piped() })
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| spawn_err(program, e))?;

    if let Some(mut stdin) = child.stdin.take() {
        let q = query.to_owned();
        // A dead child closes the pipe and ends this thread with an error.
        thread::spawn(move || {
            let _ = stdin.write_all(q.as_bytes());
        });
    }
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });

    let deadline = Instant::now() + timeout;
    loop {
        match child.try_wait() {
            Ok(Some(_)) => break,
            Ok(None) if Instant::now() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                return Ok(VerificationOutcome::ExternalUnsatOrUnknown);
            }
            Ok(None) => thread::sleep(Duration::from_millis(2)),
            Err(e) => return Err(spawn_err(program, e)),
        }
    }
    let output = reader.join().unwrap_or_default();
    drop(file);
    parse_answer(&output)
}

fn spawn_err(program: &str, source: std::io::Error) -> VerifyError {
    VerifyError::SpawnFailure {
        command: program.to_string(),
        source,
    }
}

fn parse_answer(output: &str) -> Result<VerificationOutcome, VerifyError> {
    let mut lines = output.lines().skip_while(|l| l.trim().is_empty());
    let first = lines.next().unwrap_or("").trim();
    match first {
        "sat" => Ok(VerificationOutcome::ExternalSat(lines.collect::<Vec<_>>().join("\n"))),
        "unsat" | "unknown" => Ok(VerificationOutcome::ExternalUnsatOrUnknown),
        other => Err(VerifyError::ProtocolError(other.to_string())),
    }
}

/// Counting semaphore limiting concurrent solver processes.
#[derive(Debug)]
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        SlotGuard(self)
    }
}

struct SlotGuard<'a>(&'a Slots);

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

/// A configured external solver. Clones share the process cap.
#[derive(Debug, Clone)]
pub struct ExternalSolver {
    pub argv: Vec<String>,
    pub timeout: Duration,
    slots: Arc<Slots>,
}

impl ExternalSolver {
    pub fn new(argv: Vec<String>, timeout: Duration, max_processes: usize) -> ExternalSolver {
        ExternalSolver {
            argv,
            timeout,
            slots: Arc::new(Slots {
                free: Mutex::new(max_processes.max(1)),
                cv: Condvar::new(),
            }),
        }
    }

    pub fn run(&self, query: &str) -> Result<VerificationOutcome, VerifyError> {
        let _slot = self.slots.acquire();
        run_external(&self.argv, query, self.timeout)
    }
}
