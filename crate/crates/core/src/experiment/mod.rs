//! Configuration-driven runs: parameter sweeps over a TOML config, CSV and
//! JSON outputs, and a manifest that pins down how they were produced.

mod commands;
mod config;
mod manifest;

pub use commands::{
    run, Command, RunReport, ECHO_TRACE_CSV_HEADER, GREENKUBO_CSV_HEADER, PURITY_CSV_HEADER,
    PURITY_SERIES_CSV_HEADER, SPREAD_CSV_HEADER,
};
pub use config::{
    apply_override, AnalysisBlock, AnalysisMethod, CurrentBlock, DephasingBlock, DynamicsBlock, DynamicsMethod,
    ExperimentConfig, ModelBlock, OneOrMany, OutputBlock, PurityBlock,
};
pub use manifest::{
    sha256_hex, FailureRecord, OutputDir, OutputRecord, RunManifest, SeedRecord, StageRecord, FAILURE_LOG,
    MANIFEST_FILE, MANIFEST_SCHEMA,
};

use crate::error::Error;

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "QDIFF_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_PARTIAL: i32 = 4;
/// I/O and other failures outside the documented classes.
pub const EXIT_OTHER: i32 = 1;

pub fn exit_code(outcome: &Result<RunReport, Error>) -> i32 {
    match outcome {
        Ok(r) if r.failed > 0 => EXIT_PARTIAL,
        Ok(_) => EXIT_OK,
        Err(Error::Config { .. } | Error::InvalidParameter { .. } | Error::SizeLimit { .. }) => EXIT_CONFIG,
        Err(e) if e.is_numeric() => EXIT_NUMERIC,
        Err(_) => EXIT_OTHER,
    }
}
