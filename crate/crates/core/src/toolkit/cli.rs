use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use super::bench::{run_bench, BenchConfig};
use super::generate::{gen_kissing, gen_mbo, ExpScheme, KissingConfig, MboGenConfig};
use super::solve::{solve, Mode, SolveOptions, SolveStatus};
use super::ToolkitError;
use crate::compiler::CompileOptions;
use crate::engine::SearchConfig;
use crate::frontend::parse_script;
use crate::verify::{parse_command, ExternalSolver, VerificationOutcome, Verifier};

/// Gradient-descent model search for nonlinear real arithmetic.
#[derive(Debug, Parser)]
#[command(name = "gradsat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Search for a model of an SMT-LIB file.
    Solve {
        file: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        verify: VerifyArgs,
        /// Print progress to standard error.
        #[arg(long, short)]
        verbose: bool,
    },
    /// Print a random single-polynomial root instance.
    GenMbo(GenMboArgs),
    /// Print a kissing-configuration instance.
    GenKissing {
        #[arg(long, env = "GRADSAT_POINTS")]
        points: usize,
        #[arg(long, env = "GRADSAT_DIMS")]
        dims: usize,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Solve every .smt2 file of a directory and write a CSV report.
    Bench {
        dir: PathBuf,
        #[arg(long, env = "GRADSAT_CSV", default_value = "bench.csv")]
        csv: PathBuf,
        #[arg(long, env = "GRADSAT_JOBS", default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        verify: VerifyArgs,
    },
}

#[derive(Debug, Args)]
struct SearchArgs {
    /// Assignments optimized together.
    #[arg(long, env = "GRADSAT_BATCH", default_value_t = 10_000)]
    batch: usize,
    #[arg(long, env = "GRADSAT_LR", default_value_t = 1e-3)]
    lr: f64,
    /// Slack of the relaxed loss.
    #[arg(long, env = "GRADSAT_EPSILON", default_value_t = 1e-4)]
    epsilon: f64,
    /// Wall-clock budget per instance, e.g. `30s` or `10m`.
    #[arg(long, env = "GRADSAT_TIMEOUT", default_value = "10m", value_parser = humantime::parse_duration)]
    timeout: Duration,
    #[arg(long, env = "GRADSAT_SEED", default_value_t = 0)]
    seed: u64,
    /// Evaluate on one thread.
    #[arg(long, env = "GRADSAT_DETERMINISTIC")]
    deterministic: bool,
    /// Iterations without a new unrejected candidate before the batch is resampled.
    #[arg(long, env = "GRADSAT_ROUND_ITERS", default_value_t = 5_000)]
    round_iters: u64,
    #[arg(long, env = "GRADSAT_MAX_ROUNDS")]
    max_rounds: Option<u64>,
    #[arg(long, env = "GRADSAT_BOX_LO", default_value_t = -1.0, allow_negative_numbers = true)]
    box_lo: f64,
    #[arg(long, env = "GRADSAT_BOX_HI", default_value_t = 1.0, allow_negative_numbers = true)]
    box_hi: f64,
    /// Shrink the box using single-variable linear assertions.
    #[arg(long, env = "GRADSAT_TIGHTEN_BOX")]
    tighten_box: bool,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, env = "GRADSAT_MODE", value_enum, default_value_t = Mode::Direct)]
    mode: Mode,
    /// External solver command; `{query}` is replaced by a query file, otherwise the query goes to stdin.
    #[arg(long, env = "GRADSAT_VERIFY_CMD")]
    verify_cmd: Option<String>,
    /// Half-width of the box around a candidate in external queries.
    #[arg(long, env = "GRADSAT_DELTA", default_value_t = 1e-3)]
    delta: f64,
    #[arg(long, env = "GRADSAT_VERIFY_TIMEOUT", default_value = "30s", value_parser = humantime::parse_duration)]
    verify_timeout: Duration,
    /// Concurrent external solver processes.
    #[arg(long, env = "GRADSAT_VERIFY_PROCS", default_value_t = 4)]
    verify_procs: usize,
}

#[derive(Debug, Args)]
struct GenMboArgs {
    #[arg(long, env = "GRADSAT_PRODUCTS", default_value_t = 25)]
    products: usize,
    #[arg(long, env = "GRADSAT_DEGREE", default_value_t = 5)]
    degree: u32,
    #[arg(long, env = "GRADSAT_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "GRADSAT_J2_PROB", default_value_t = 0.4)]
    j2_prob: f64,
    #[arg(long, env = "GRADSAT_COEFF_LO", default_value_t = 1)]
    coeff_lo: i64,
    #[arg(long, env = "GRADSAT_COEFF_HI", default_value_t = 20)]
    coeff_hi: i64,
    #[arg(long, env = "GRADSAT_NEG_PROB", default_value_t = 0.2)]
    neg_prob: f64,
    #[arg(long, env = "GRADSAT_EXP_SCHEME", value_enum, default_value_t = ExpScheme::Multinomial)]
    exp_scheme: ExpScheme,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

impl SearchArgs {
    fn config(&self) -> SearchConfig {
        SearchConfig {
            batch_size: self.batch,
            lr: self.lr,
            epsilon: self.epsilon,
            wall_timeout: Some(self.timeout),
            seed: self.seed,
            deterministic: self.deterministic,
            max_iters_per_round: self.round_iters,
            max_rounds: self.max_rounds,
            box_lo: self.box_lo,
            box_hi: self.box_hi,
            tighten_box: self.tighten_box,
            ..SearchConfig::default()
        }
    }
}

fn solve_options(search: &SearchArgs, verify: &VerifyArgs) -> Result<SolveOptions, ToolkitError> {
    let cfg = search.config();
    cfg.validate()?;
    if !(verify.delta > 0.0 && verify.delta.is_finite()) {
        return Err(ToolkitError::InvalidArgument(format!("--delta must be positive, got {}", verify.delta)));
    }
    let external = match &verify.verify_cmd {
        Some(cmd) => Some(ExternalSolver::new(parse_command(cmd)?, verify.verify_timeout, verify.verify_procs)),
        None => None,
    };
    Ok(SolveOptions {
        search: cfg,
        mode: verify.mode,
        verifier: Verifier {
            external,
            delta: verify.delta,
        },
        compile: CompileOptions::default(),
    })
}

/// Runs the command line; returns the process exit code.
pub fn cli_main(args: impl IntoIterator<Item = impl Into<OsString> + Clone>) -> i32 {
    run_cli(args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

/// [`cli_main`] with explicit output streams. Exit codes: 0 sat or success, 1 unknown,
/// 2 usage, parse or I/O errors.
pub fn run_cli(
    args: impl IntoIterator<Item = impl Into<OsString> + Clone>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{}", text.ansi())
            };
            return code;
        }
    };
    match run(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}

fn emit(text: &str, output: Option<&PathBuf>, out: &mut dyn Write) -> Result<(), ToolkitError> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| ToolkitError::Io(path.display().to_string(), e)),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| ToolkitError::Io("stdout".into(), e)),
    }
}

fn run(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, ToolkitError> {
    match command {
        Command::Solve {
            file,
            search,
            verify,
            verbose,
        } => {
            let opts = solve_options(&search, &verify)?;
            let text = std::fs::read_to_string(&file).map_err(|e| ToolkitError::Io(file.display().to_string(), e))?;
            let problem = parse_script(&text)?;
            let report = solve(&problem, &opts, |p| {
                if verbose {
                    let _ = writeln!(
                        err,
                        "iter {} round {} min_loss {:.3e} best {:.3e} candidates {} elapsed {:.1}s",
                        p.iteration,
                        p.round,
                        p.min_loss,
                        p.best_loss,
                        p.candidates,
                        p.elapsed.as_secs_f64()
                    );
                }
            })?;
            if let Some(VerificationOutcome::NeedsExternal(_)) = &report.outcome {
                let _ = writeln!(err, "candidate found, but equalities need an external solver (--verify-cmd)");
            }
            emit(&report.render(&problem), None, out)?;
            Ok(if report.status == SolveStatus::Sat { 0 } else { 1 })
        }
        Command::GenMbo(a) => {
            let cfg = MboGenConfig {
                products: a.products,
                degree: a.degree,
                j2_prob: a.j2_prob,
                coeff_lo: a.coeff_lo,
                coeff_hi: a.coeff_hi,
                neg_prob: a.neg_prob,
                seed: a.seed,
                exp_scheme: a.exp_scheme,
            };
            emit(&gen_mbo(&cfg)?, a.output.as_ref(), out)?;
            Ok(0)
        }
        Command::GenKissing { points, dims, output } => {
            emit(&gen_kissing(&KissingConfig { points, dims })?, output.as_ref(), out)?;
            Ok(0)
        }
        Command::Bench {
            dir,
            csv,
            jobs,
            search,
            verify,
        } => {
            let solve = solve_options(&search, &verify)?;
            let records = run_bench(&dir, &BenchConfig { solve, jobs }, &csv)?;
            let sat = records.iter().filter(|r| r.status == super::BenchStatus::Sat).count();
            let _ = writeln!(err, "{sat}/{} sat, report in {}", records.len(), csv.display());
            Ok(0)
        }
    }
}
