//! Experiment configuration, orchestration and CSV emission.

mod config;
mod experiment;
mod output;

pub use config::{
    parse_config, parse_config_with, serialize_config, AuditConfig, ConcentrationConfig, ExperimentConfig,
    ExperimentKind, HardConfig, InstanceConfig, Profile, StudyEstimator,
};
pub use experiment::{
    empirical_quantile, run_cells, run_experiment, run_experiment_on, sampled_rounds, AuditRow, CellFailure,
    ConcentrationRow, ExperimentOutput, RegretRow, ResultRows, RunCell,
};
pub use output::{emit_csv, format_f64, write_csv, AUDIT_HEADER, CONCENTRATION_HEADER, REGRET_HEADER};
