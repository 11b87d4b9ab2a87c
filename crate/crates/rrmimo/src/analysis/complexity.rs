//! Closed-form operation counts per symbol and instrumented measurements.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adaptation::{adapt_step_metered, FullRankRls, RankPolicy, TargetScaling};
use crate::channel::MimoDims;
use crate::equalizer::EqualizerState;
use crate::linalg::{OpCounter, C64};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Conventional RLS on the full input.
    FullRank,
    /// Joint iterative reduced-rank RLS.
    Proposed,
    /// Multistage Wiener filter (formula only).
    Mswf,
    /// Auxiliary vector filtering (formula only).
    Avf,
    /// Rank selection over extended filters.
    ProposedOrderSelection,
    /// Projection-based rank selection with a stopping rule (formula only).
    ProjectionStoppingRule,
    /// Cross-validation rank selection (formula only).
    CrossValidation,
}

impl Algorithm {
    pub const ESTIMATORS: [Algorithm; 4] = [Algorithm::FullRank, Algorithm::Proposed, Algorithm::Mswf, Algorithm::Avf];
    pub const ORDER_SELECTION: [Algorithm; 3] =
        [Algorithm::ProposedOrderSelection, Algorithm::ProjectionStoppingRule, Algorithm::CrossValidation];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::FullRank => "full-rank",
            Algorithm::Proposed => "proposed",
            Algorithm::Mswf => "mswf",
            Algorithm::Avf => "avf",
            Algorithm::ProposedOrderSelection => "proposed-order-selection",
            Algorithm::ProjectionStoppingRule => "projection-stopping-rule",
            Algorithm::CrossValidation => "cross-validation",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityParams {
    pub m: u64,
    pub d: u64,
    pub d_min: u64,
    pub d_max: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub algorithm: Algorithm,
    pub additions: u64,
    pub multiplications: u64,
    pub params: ComplexityParams,
}

/// Additions and multiplications per received symbol.
pub fn count_operations(algorithm: Algorithm, params: ComplexityParams) -> Result<ComplexityReport> {
    let ComplexityParams { m, d, d_min, d_max } = params;
    let (m, d, lo, hi) = (m as i128, d as i128, d_min as i128, d_max as i128);
    let needs_rank = matches!(algorithm, Algorithm::Proposed | Algorithm::Mswf | Algorithm::Avf);
    let needs_window = Algorithm::ORDER_SELECTION.contains(&algorithm);
    if m < 1 || (needs_rank && d < 1) || (needs_window && (lo < 1 || hi < lo)) {
        return Err(Error::Parameter(format!("invalid parameters {params:?} for {algorithm}")));
    }
    let span = hi - lo;
    let (adds, mults) = match algorithm {
        Algorithm::FullRank => (2 * m * m + m + 1, 3 * m * m + 5 * m),
        Algorithm::Proposed => (
            2 * m * m - m + 4 * d * d + m * d + d + 3,
            3 * m * m + 3 * m + 6 * d * d + m * d + 8 * d,
        ),
        Algorithm::Mswf => (
            d * m * m + 6 * d * d - 8 * d + 2 + m * m,
            d * m * m + 2 * d * m + 3 * d + m * m + 2,
        ),
        Algorithm::Avf => (
            d * m * m + 2 * m - 1 + 5 * d * (m - 1) + 1 + 3 * (d * m - 1) * (d * m - 1),
            4 * d * m * m + 4 * d * m + 4 * m + 4 * d + 2,
        ),
        Algorithm::ProposedOrderSelection => (2 * span + 1, 0),
        Algorithm::ProjectionStoppingRule => (2 * (2 * m - 1) * (span + 1), (m * m + m + 1) * (span + 1)),
        Algorithm::CrossValidation => ((2 * m - 1) * (2 * span + 1), (span + 1) * (m + 1)),
    };
    Ok(ComplexityReport { algorithm, additions: adds as u64, multiplications: mults as u64, params })
}

/// Measured per-symbol counts of the update path next to the closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasuredRow {
    pub algorithm: Algorithm,
    pub m: usize,
    pub d: usize,
    pub measured_multiplications: f64,
    pub measured_additions: f64,
    pub analytic_multiplications: u64,
    pub analytic_additions: u64,
}

impl MeasuredRow {
    pub fn multiplication_ratio(&self) -> f64 {
        self.measured_multiplications / self.analytic_multiplications as f64
    }

    pub fn addition_ratio(&self) -> f64 {
        self.measured_additions / self.analytic_additions as f64
    }
}

/// Run `steps` instrumented updates of the full-rank and proposed recursions
/// at each `M` and average the counts per symbol.
pub fn measured_vs_analytic(m_values: &[usize], d: usize, steps: usize, seed: u64) -> Result<Vec<MeasuredRow>> {
    let mut rows = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &m in m_values {
        let dims = MimoDims { n_t: 1, n_r: m, l_p: 1, l: 1, b: 0 };
        let data: Vec<(Vec<C64>, C64)> = (0..steps)
            .map(|_| {
                let r = (0..m).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
                (r, C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            })
            .collect();

        let mut full = FullRankRls::new(m, 0.998, 0.01)?;
        let mut count = OpCounter::default();
        for (r, x) in &data {
            full.step(r, *x, &mut count)?;
        }
        rows.push(row(Algorithm::FullRank, m, d, count, steps)?);

        let mut eq = EqualizerState::new(0, dims, RankPolicy::Fixed(d), 0.998, 0.01, TargetScaling::default())?;
        let mut count = OpCounter::default();
        for (r, x) in &data {
            adapt_step_metered(&mut eq, r, *x, &mut count)?;
        }
        rows.push(row(Algorithm::Proposed, m, d, count, steps)?);
    }
    Ok(rows)
}

fn row(algorithm: Algorithm, m: usize, d: usize, count: OpCounter, steps: usize) -> Result<MeasuredRow> {
    let analytic = count_operations(algorithm, ComplexityParams { m: m as u64, d: d as u64, d_min: 1, d_max: 1 })?;
    Ok(MeasuredRow {
        algorithm,
        m,
        d,
        measured_multiplications: count.multiplications as f64 / steps as f64,
        measured_additions: count.additions as f64 / steps as f64,
        analytic_multiplications: analytic.multiplications,
        analytic_additions: analytic.additions,
    })
}
