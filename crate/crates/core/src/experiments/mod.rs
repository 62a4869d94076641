//! Seeded, budget-matched experiment harness and the oracle self-check.
//!
//! Every experiment expands into `(coordinate, repeat)` jobs. Repeat `r` uses
//! chain stream `r` under the master seed for every coordinate, so estimators
//! compared within one experiment see common random numbers. Jobs run on a
//! rayon pool and are merged in `(coordinate, repeat)` order, so the CSV is
//! byte-identical for any thread count.

mod config;
mod metrics;
mod oracle;
mod runner;

pub use config::{ExperimentConfig, ExperimentKind, ModelSpec, DEFAULT_N1_VALUES};
pub use metrics::{median, ExperimentOutput, MetricRow, CSV_COLUMNS, DIVERGED, MEDIAN};
pub use oracle::{decomposition_matches, run_oracle_check, run_oracle_check_with, OracleCase, OracleReport, PartsFn};
pub use runner::{
    build_workload, iterations_within_budget, run_budget_sweep, run_experiment, run_n1_sweep, run_vr_compare,
    Workload,
};
