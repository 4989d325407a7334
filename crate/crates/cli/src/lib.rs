//! Instance files, seeded campaigns and certificate reports.

#![allow(clippy::needless_range_loop)]

pub mod campaign;
pub mod claims;
pub mod instance;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("Gram matrix is not symmetric at ({row}, {col})")]
    AsymmetricGram { row: usize, col: usize },
    #[error("bad tower expression: {0}")]
    BadTowerExpr(String),
    #[error(transparent)]
    Core(#[from] qbar_core::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Exit code for input errors.
pub const EXIT_INPUT: i32 = 4;
