//! Benchmark harness: generators, scenarios, sweeps and CSV reports.

pub mod generate;
pub mod scenario;
pub mod sweep;

pub use crate::matrix::{load_matrix, save_matrix, MarketLayout};
pub use generate::{generate, GeneratorKind, GeneratorSpec};
pub use scenario::{
    dense_products4, multiply_matrices, run_scenario, write_reports, RunOptions, RunReport,
    Scenario, Workload, CSV_HEADER,
};
pub use sweep::{
    calibrate_tau, loglog_slope, run_single, sweep, write_ratios, Calibration, CalibrationRange,
    RatioRow, SweepResult, RATIO_HEADER,
};
