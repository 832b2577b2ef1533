//! Named scenarios, convergence studies, run configuration and study output.

pub mod config;
pub mod output;
pub mod scenario;
pub mod study;

pub use config::{load_config, parse_config, RunConfig};
pub use output::{emit_outputs, read_csv, write_csv, CsvRow};
pub use scenario::{scenario, Scenario, SCENARIOS};
pub use study::{run_spatial_study, run_temporal_study, solve_problem, Comparison, RunOutcome, SolveOptions, StudyConfig};
