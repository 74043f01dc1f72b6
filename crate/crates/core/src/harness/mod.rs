//! Seeded experiment execution, persistence and rendering.

pub mod batch;
pub mod export;
pub mod record;
pub mod stats;
pub mod svg;

pub use record::{run_experiment, run_experiment_with_schedule, RunRecord, SCHEMA_VERSION};
pub use stats::{summarize, SummaryStats};
