use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::solve::{solve, Mode, SolveOptions, SolveStatus};
use super::ToolkitError;
use crate::frontend::parse_script;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchStatus {
    Sat,
    Unknown,
    Error,
}

/// One CSV row. Column order is field order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub instance: String,
    pub mode: Mode,
    pub status: BenchStatus,
    pub wall_ms: f64,
    pub iterations: u64,
    pub rounds: u64,
    pub batch_size: usize,
    pub epsilon: f64,
    pub seed: u64,
    /// Candidate coordinates of a sat row, `name=value;...`.
    pub model: String,
}

pub const CSV_HEADER: [&str; 10] = [
    "instance",
    "mode",
    "status",
    "wall_ms",
    "iterations",
    "rounds",
    "batch_size",
    "epsilon",
    "seed",
    "model",
];

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub solve: SolveOptions,
    /// Instances solved at the same time.
    pub jobs: usize,
}

/// `.smt2` files of `dir` in name order.
pub fn list_instances(dir: &Path) -> Result<Vec<PathBuf>, ToolkitError> {
    let io = |e| ToolkitError::Io(dir.display().to_string(), e);
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .collect::<Result<Vec<_>, _>>()
        .map_err(io)?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "smt2"))
        .collect();
    files.sort();
    Ok(files)
}

/// Solves every instance of `dir` and writes one CSV row per instance to `csv_out`.
///
/// Rows appear in name order as soon as every earlier instance has finished, so the file
/// is the same for any `jobs`.
pub fn run_bench(dir: &Path, cfg: &BenchConfig, csv_out: &Path) -> Result<Vec<BenchRecord>, ToolkitError> {
    let files = list_instances(dir)?;
    let out_err = |e: std::io::Error| ToolkitError::Io(csv_out.display().to_string(), e);
    let file = fs::File::create(csv_out).map_err(out_err)?;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    writer.write_record(CSV_HEADER).map_err(csv_err)?;
    writer.flush().map_err(out_err)?;
    let sink = Mutex::new(OrderedSink {
        writer,
        next: 0,
        pending: BTreeMap::new(),
    });

    let run_one = |(i, path): (usize, &PathBuf)| -> Result<BenchRecord, ToolkitError> {
        let record = bench_instance(path, &cfg.solve);
        let mut guard = sink.lock().unwrap_or_else(|e| e.into_inner());
        let s = &mut *guard;
        s.pending.insert(i, record.clone());
        while let Some(r) = s.pending.remove(&s.next) {
            s.writer.serialize(&r).map_err(csv_err)?;
            s.next += 1;
        }
        s.writer.flush().map_err(out_err)?;
        Ok(record)
    };
    let records: Vec<BenchRecord> = if cfg.jobs <= 1 {
        files.iter().enumerate().map(run_one).collect::<Result<_, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| ToolkitError::InvalidArgument(e.to_string()))?;
        pool.install(|| files.par_iter().enumerate().map(run_one).collect::<Result<_, _>>())?
    };
    Ok(records)
}

struct OrderedSink {
    writer: csv::Writer<fs::File>,
    next: usize,
    pending: BTreeMap<usize, BenchRecord>,
}

fn csv_err(e: csv::Error) -> ToolkitError {
    ToolkitError::Csv(e.to_string())
}

/// Runs one instance; every failure becomes an error row.
pub fn bench_instance(path: &Path, opts: &SolveOptions) -> BenchRecord {
    let start = Instant::now();
    let mut record = BenchRecord {
        instance: path.display().to_string(),
        mode: opts.mode,
        status: BenchStatus::Error,
        wall_ms: 0.0,
        iterations: 0,
        rounds: 0,
        batch_size: opts.search.batch_size,
        epsilon: opts.search.epsilon,
        seed: opts.search.seed,
        model: String::new(),
    };
    let result = catch_unwind(AssertUnwindSafe(|| -> Result<_, ToolkitError> {
        let text = fs::read_to_string(path).map_err(|e| ToolkitError::Io(path.display().to_string(), e))?;
        let problem = parse_script(&text)?;
        solve(&problem, opts, |_| {})
    }));
    match result {
        Ok(Ok(report)) => {
            record.mode = report.mode;
            record.status = match report.status {
                SolveStatus::Sat => BenchStatus::Sat,
                SolveStatus::Unknown => BenchStatus::Unknown,
            };
            record.iterations = report.stats.iterations;
            record.rounds = report.stats.rounds;
            record.model = report.model_column();
        }
        Ok(Err(e)) => {
            let _ = writeln!(std::io::stderr(), "{}: {e}", path.display());
        }
        Err(_) => {
            let _ = writeln!(std::io::stderr(), "{}: solver panicked", path.display());
        }
    }
    record.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    record
}
