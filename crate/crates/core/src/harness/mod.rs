//! Monte Carlo experiment runner, report emission and the built-in figure
//! presets used by the CLI.

mod repro;
mod report;
mod runner;
mod spec;

pub use repro::{repro_spec, FIGURE_IDS};
pub use report::{
    emit_report, read_csv, sidecar_toml, write_csv, write_runs_csv, CellSummary,
    MonteCarloReport, ReportFormat, RunRecord, CSV_HEADER,
};
pub use runner::{
    estimator_seed, plan_experiment, run_experiment, run_experiment_with, run_seed, CellPlan,
    RunOptions, THREADS_ENV,
};
pub use spec::{EstimatorKind, ExperimentSpec, SweepPoint};
