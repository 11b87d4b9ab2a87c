//! Estimators for the transformation matrix and reduced-rank weights.
//!
//! [`batch`] holds the closed-form alternating least-squares design,
//! [`rls`] the per-sample recursions and the full-rank baseline, and
//! [`order`] the automatic rank selection over extended filters.

pub mod batch;
pub mod order;
pub mod rls;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use batch::{alternate, batch_design_s, batch_design_w, evaluate_ses, is_degenerate, Alternation, BatchLsWorkspace};
pub use order::{select_rank, RankCost};
pub use rls::{
    adapt_step, adapt_step_metered, adapt_step_with_gain, full_rank_rls_step, rls_update_s, rls_update_w, AdaptDiagnostics,
    FullRankRls, GainTracker,
};

use crate::linalg::{scaled_identity, C64, ZERO};
use crate::{Error, Result};

/// Rank of the transformation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum RankPolicy {
    Fixed(usize),
    Auto { d_min: usize, d_max: usize },
}

impl RankPolicy {
    /// Column count of the stored filters.
    pub fn width(&self) -> usize {
        match *self {
            RankPolicy::Fixed(d) => d,
            RankPolicy::Auto { d_max, .. } => d_max,
        }
    }

    /// Rank used before any selection has happened.
    pub fn initial_rank(&self) -> usize {
        match *self {
            RankPolicy::Fixed(d) => d,
            RankPolicy::Auto { d_min, .. } => d_min,
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        let ok = match *self {
            RankPolicy::Fixed(d) => d >= 1 && d <= m,
            RankPolicy::Auto { d_min, d_max } => d_min >= 1 && d_min <= d_max && d_max <= m,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("rank policy {self:?} invalid for M={m}")))
        }
    }

    /// Short label used in CSV output, e.g. `fixed-4` or `auto-3-8`.
    pub fn label(&self) -> String {
        match *self {
            RankPolicy::Fixed(d) => format!("fixed-{d}"),
            RankPolicy::Auto { d_min, d_max } => format!("auto-{d_min}-{d_max}"),
        }
    }
}

impl fmt::Display for RankPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for RankPolicy {
    type Err = Error;

    /// Parses `fixed-4` or `auto-3-8`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parameter(format!("rank policy must look like fixed-D or auto-DMIN-DMAX, got {s:?}"));
        let parts: Vec<&str> = s.trim().split('-').collect();
        let num = |t: &str| t.parse::<usize>().map_err(|_| bad());
        match parts.as_slice() {
            ["fixed", d] => Ok(RankPolicy::Fixed(num(d)?)),
            ["auto", lo, hi] => Ok(RankPolicy::Auto { d_min: num(lo)?, d_max: num(hi)? }),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for RankPolicy {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<RankPolicy> for String {
    fn from(p: RankPolicy) -> String {
        p.label()
    }
}

/// Target direction `t` in the transformation-matrix update
/// `S ← S + k(x*·tᴴ − rᴴS)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetScaling {
    /// `t = w̄/(w̄ᴴw̄)`, the pseudo-inverse of the rank-one weight outer
    /// product applied to `w̄`.
    #[default]
    PseudoInverse,
    /// `t = Q_w̄·w̄` with `Q_w̄` the inverse of the exponentially weighted
    /// accumulator of `w̄w̄ᴴ`.
    Accumulated,
}

/// Recursive auxiliaries of one stream.
#[derive(Debug, Clone)]
pub struct RlsState {
    /// `M×M` inverse input covariance.
    pub p: DMatrix<C64>,
    /// Inverse of the weight outer-product accumulator.
    pub q_w: DMatrix<C64>,
    /// Reduced inverse covariance `Φ̄`.
    pub phi_bar: DMatrix<C64>,
    pub t: DVector<C64>,
    pub k: DVector<C64>,
    pub k_bar: DVector<C64>,
    pub lambda: f64,
    pub delta: f64,
    pub scaling: TargetScaling,
    pub(crate) scratch_m: Vec<C64>,
    pub(crate) scratch_d: Vec<C64>,
    pub(crate) rbar: Vec<C64>,
}

impl RlsState {
    pub fn new(m: usize, d: usize, lambda: f64, delta: f64, scaling: TargetScaling) -> Result<Self> {
        check_lambda_delta(lambda, delta)?;
        Ok(Self {
            p: scaled_identity(m, delta),
            q_w: scaled_identity(d, delta),
            phi_bar: scaled_identity(d, delta),
            t: DVector::from_element(d, ZERO),
            k: DVector::from_element(m, ZERO),
            k_bar: DVector::from_element(d, ZERO),
            lambda,
            delta,
            scaling,
            scratch_m: vec![ZERO; m],
            scratch_d: vec![ZERO; d],
            rbar: vec![ZERO; d],
        })
    }
}

pub(crate) fn check_lambda_delta(lambda: f64, delta: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Parameter(format!("forgetting factor must lie in (0, 1], got {lambda}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Parameter(format!("regularization must be positive, got {delta}")));
    }
    Ok(())
}
