//! Oracles and meters: the reduced-rank Wiener filter, convergence
//! diagnostics and operation counts.

pub mod complexity;
pub mod wiener;

pub use complexity::{count_operations, measured_vs_analytic, Algorithm, ComplexityParams, ComplexityReport, MeasuredRow};
pub use wiener::{convergence_metric, wiener_reduced_rank, ConvergenceMetric, WienerOracle};
