//! Command-line experiment front end for the Hadamard policy-gradient
//! toolkit: seeded instance generation, the run-and-audit pipeline, the
//! three-way bandit comparison and deterministic result emission.

pub mod experiment;
pub mod generate;
pub mod output;

use thiserror::Error;

pub use experiment::{
    audit_trace_file, mab_compare_curves, mab_instance_errors, run_mab_experiment,
    run_mdp_experiment, Format, MabCompareConfig, MabCurveRow, MdpRunConfig, MdpRunOutput,
    TraceFile, AUDIT_TOL, LOG_ERROR_FLOOR, MAB_METHODS, SOLVE_TOL, TIE_TOL,
};
pub use generate::{generate_random_mab, generate_random_mdp};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv failure: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Mdp(#[from] hadamard_pg::mdp::MdpError),

    #[error(transparent)]
    Step(#[from] hadamard_pg::hadamard::StepError),

    #[error(transparent)]
    Analysis(#[from] hadamard_pg::analysis::AnalysisError),
}
