//! Joint iterative reduced-rank MIMO equalization.
//!
//! The crate is split along the signal chain:
//!
//! - [`channel`]: symbol frames, Clarke-faded multipath MIMO channels, noisy
//!   receive samples and per-tone OFDM responses.
//! - [`equalizer`]: input stacking with parallel decision feedback, the
//!   reduced-rank projection and combiner, and the QPSK slicer.
//! - [`adaptation`]: batch alternating least squares, the recursive RLS
//!   recursions for the transformation matrix and reduced-rank weights, the
//!   full-rank RLS baseline and automatic rank selection.
//! - [`analysis`]: reduced-rank Wiener oracle, convergence metrics and
//!   operation counts.
//! - [`harness`]: configuration, the Monte Carlo engine, the experiment
//!   families and CSV output.

pub mod adaptation;
pub mod analysis;
pub mod channel;
pub mod equalizer;
mod error;
pub mod harness;
pub mod linalg;
pub mod parallel;

pub use error::{Error, Result};
pub use linalg::C64;
