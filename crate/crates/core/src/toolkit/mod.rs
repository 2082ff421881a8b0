//! Instance generators, the solve pipeline, the benchmark harness and the command line.

mod bench;
mod cli;
mod generate;
mod solve;

use thiserror::Error;

pub use bench::{bench_instance, list_instances, run_bench, BenchConfig, BenchRecord, BenchStatus, CSV_HEADER};
pub use cli::{cli_main, run_cli};
pub use generate::{gen_kissing, gen_mbo, mbo_products, ExpScheme, KissingConfig, MboGenConfig, MboProduct, MBO_VARS};
pub use solve::{solve, Mode, SolveOptions, SolveReport, SolveStatus};

use crate::compiler::CompileError;
use crate::engine::EngineError;
use crate::frontend::ParseError;
use crate::verify::VerifyError;

#[derive(Debug, Error)]
pub enum ToolkitError {
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error("invalid generator settings: {0}")]
    InvalidGenerator(String),
    #[error("{0}")]
    InvalidArgument(String),
    #[error("csv: {0}")]
    Csv(String),
}
