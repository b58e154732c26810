//! Experiment harness for the `finapprox` library: plans, per-cell runs,
//! convergence-rate fits and CSV reports.

pub mod analysis;
pub mod bench;
pub mod cells;
pub mod plan;

pub use analysis::{fit_rate, relative_error_table, RateFit, RelativeError};
pub use bench::{run_plan, PlanReport};
pub use plan::{ExperimentPlan, Method, ModelSource};
