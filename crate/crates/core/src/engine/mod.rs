//! Batched projected gradient descent over a compiled loss.
//!
//! A search keeps a batch of assignments, takes Adam steps on all of them at once and
//! clamps the result back into the box. Rows whose loss drops to the candidate
//! threshold are handed to a caller-supplied check; the search itself never decides
//! satisfiability.

mod config;
mod search;
mod state;

use thiserror::Error;

pub use config::SearchConfig;
pub use search::{search, search_first, Candidate, Progress, SearchOutcome, SearchStats, SearchStatus, Verdict};
pub use state::{init_batch, project, step, BatchState};

use crate::compiler::CompileError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error("loss is not finite for any sample")]
    NonFiniteLoss,
    #[error("batch has {got} columns, loss expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Compile(#[from] CompileError),
}
