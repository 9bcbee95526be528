//! Monte Carlo harness: matrix-Gaussian data generation, empirical risk
//! measurement, ensembled bias-variance decomposition, correlated-test-point
//! sampling, deterministic-equivalence trace tests, and the grid sweep driver.

mod config;
mod dataset;
mod measure;
mod sweep;

pub use config::{CovarianceSpec, ExperimentConfig, SKernelProvenance};
pub use dataset::{generate_dataset, Dataset, GeneratorContext};
pub use measure::{
    empirical_risks, sample_correlated_test, trace_test_two_point, variance_decomposition,
    EmpiricalRisks, TraceTestReport, VarianceComponents,
};
pub use sweep::{run_sweep, run_sweep_with, run_theory, write_rows_csv, SweepOutcome, SweepRow, CSV_HEADER};
