//! Experiment orchestration: configuration, Monte Carlo engine, experiment
//! families and CSV output.

pub mod config;
pub mod engine;
pub mod experiments;
pub mod record;
pub mod seed;
pub mod selftest;

pub use config::{AlgorithmKind, ExperimentConfig, OfdmConfig, SweepSpec};
pub use engine::{run_single, simulate, simulate_ofdm, RunTrace, Scenario, Variant};
pub use experiments::{
    ber_vs_symbols, fading_sweep, ofdm_antenna_sweep, rank_sweep, snr_sweep, SweepOutcome, LAMBDA_GRID,
};
pub use record::{write_csv, BerRecord};
pub use selftest::{selftest, CheckResult};

/// Environment variable naming the directory for relative CSV paths.
pub const OUT_DIR_ENV: &str = "RRMIMO_OUT_DIR";
