//! Experiment driver: plans, sweeps, self-checks and CSV output.

pub mod checks;
pub mod config;
pub mod csv;
pub mod oracle;
pub mod studies;

pub use checks::{run_checks, CheckOptions, CheckReport};
pub use config::{parse_number, ExperimentPlan, Study};
pub use studies::{fit_loglog, run_study, StudyReport};
