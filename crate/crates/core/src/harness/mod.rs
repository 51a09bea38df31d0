//! Replicated runs, empirical error statistics, convergence and allocation
//! sweeps, and an exact oracle for small discrete problems.

mod estimators;
mod oracle;
mod registry;
mod replicate;
mod report;
mod stats;
mod sweep;

pub use estimators::{fn_estimator, Estimator, FnEstimator, Nested, Provenance, Truth};
pub use oracle::{enumeration_oracle, MAX_JOINT_OUTCOMES};
pub use registry::{bed_reference, cancer_reference, model, ModelEntry, ModelOptions, MODEL_NAMES};
pub use replicate::{run_replicates, ReplicateRun};
pub use report::{
    check_sweep_csv, write_alpha_csv, write_sweep_csv, write_sweep_text, ALPHA_CSV_HEADER, SWEEP_CSV_HEADER,
};
pub use stats::{empirical_mse, nonincreasing_fit, quantile, MseStats};
pub use sweep::{
    alpha_grid, alpha_sweep, convergence_sweep, fit_power_law, fit_slope, geometric_ladder, grid_2d, parse_ladder,
    AlphaReport, AlphaRow, SlopeFit, Strategy, SweepConfig, SweepReport, SweepRow, DEFAULT_WINDOW,
};
