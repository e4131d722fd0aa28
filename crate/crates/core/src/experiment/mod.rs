//! Configuration-driven experiments behind the command-line tool.

pub mod config;
pub mod oracle_check;
pub mod runner;

pub use config::{CsvSource, Design, ExperimentConfig, ExperimentKind, InferenceConfig, MethodConfig};
pub use oracle_check::{oracle_suite, run_oracle_check, CheckResult};
pub use runner::{
    generate_repetition_data, run_analyze, run_analyze_reports, run_convergence, run_repetition, run_simulate,
    run_simulate_reports, write_outputs, write_rows, ConvergenceRow, RepetitionOutput, ResultRow,
    CONVERGENCE_HEADER, RESULT_HEADER,
};
