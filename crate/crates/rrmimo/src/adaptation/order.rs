//! Automatic rank selection over extended filters.

use crate::linalg::{Meter, C64};

/// Exponentially weighted a-posteriori cost of every candidate rank.
///
/// Candidate `d` uses the leading `d` columns of the extended `S` and the
/// leading `d` entries of the extended `w̄`, so all candidates come from one
/// recursion at `d_max` and their outputs are prefix sums.
#[derive(Debug, Clone, PartialEq)]
pub struct RankCost {
    pub d_min: usize,
    pub d_max: usize,
    pub lambda: f64,
    /// `costs[d − d_min]`.
    pub costs: Vec<f64>,
}

impl RankCost {
    pub fn new(d_min: usize, d_max: usize, lambda: f64) -> Self {
        Self { d_min, d_max, lambda, costs: vec![0.0; d_max - d_min + 1] }
    }

    /// `C_d ← λ·C_d + |x − Σ_{c<d} w̄_c*·r̄_c|²` for each candidate.
    pub fn update<M: Meter>(&mut self, w_bar: &[C64], rbar: &[C64], x: C64, meter: &mut M) {
        debug_assert!(w_bar.len() >= self.d_max && rbar.len() >= self.d_max);
        let mut acc: C64 = (0..self.d_min).map(|c| w_bar[c].conj() * rbar[c]).sum();
        for (idx, cost) in self.costs.iter_mut().enumerate() {
            let d = self.d_min + idx;
            if d > self.d_min {
                acc += w_bar[d - 1].conj() * rbar[d - 1];
            }
            *cost = self.lambda * *cost + (x - acc).norm_sqr();
        }
        let n = self.costs.len() as u64;
        meter.mul(self.d_max as u64 + 3 * n);
        meter.add(self.d_max as u64 + 3 * n);
    }

    /// Current best rank.
    pub fn select(&self) -> usize {
        select_rank(&self.costs, self.d_min)
    }
}

/// Argmin over `costs[d − d_min]`; ties resolve to the smallest `d`.
pub fn select_rank(costs: &[f64], d_min: usize) -> usize {
    let mut best = 0;
    for (i, &c) in costs.iter().enumerate().skip(1) {
        if c < costs[best] {
            best = i;
        }
    }
    d_min + best
}
