//! Per-sample recursions.

use nalgebra::{DMatrix, DVector};

use super::{check_lambda_delta, TargetScaling};
use crate::equalizer::{Combiner, EqualizerState};
use crate::linalg::{all_finite, dotc, lemma_update, scaled_identity, Meter, NoMeter, C64, ZERO};
use crate::{Error, Result};

/// What one adaptation cycle reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptDiagnostics {
    /// `x − (S_d·w̄_d)ᴴr` with the filters from before the update.
    pub a_priori_error: C64,
    /// Rank in force for the next output.
    pub rank: usize,
}

/// Inverse covariance and Kalman gain of an `M`-dimensional input.
///
/// Streams that see the same input (linear mode) can share one tracker.
#[derive(Debug, Clone)]
pub struct GainTracker {
    pub p: DMatrix<C64>,
    pub k: Vec<C64>,
    pub lambda: f64,
    g: Vec<C64>,
}

impl GainTracker {
    pub fn new(m: usize, lambda: f64, delta: f64) -> Result<Self> {
        check_lambda_delta(lambda, delta)?;
        Ok(Self { p: scaled_identity(m, delta), k: vec![ZERO; m], lambda, g: vec![ZERO; m] })
    }

    /// `k = P·r/(λ + rᴴP·r)`, `P ← (P − k·(P·r)ᴴ)/λ`. Returns the new gain.
    pub fn update<M: Meter>(&mut self, r: &[C64], meter: &mut M) -> &[C64] {
        lemma_update(&mut self.p, r, self.lambda, &mut self.k, &mut self.g, meter);
        &self.k
    }
}

/// Gain and inverse-covariance update, then the transformation matrix.
pub fn rls_update_s<M: Meter>(eq: &mut EqualizerState, r: &[C64], x_ref: C64, meter: &mut M) -> Result<()> {
    check_len(eq, r)?;
    let rls = &mut eq.rls;
    lemma_update(&mut rls.p, r, rls.lambda, rls.k.as_mut_slice(), &mut rls.scratch_m, meter);
    transform_update(eq, r, x_ref, meter)
}

/// `Q_w̄` by the lemma with the previous `w̄`, the target `t`, then
/// `S ← S + k(x*·tᴴ − rᴴS)` with the gain already in `eq.rls.k`.
fn transform_update<M: Meter>(eq: &mut EqualizerState, r: &[C64], x_ref: C64, meter: &mut M) -> Result<()> {
    let rls = &mut eq.rls;
    let w = eq.w_bar.as_slice();
    lemma_update(&mut rls.q_w, w, rls.lambda, rls.t.as_mut_slice(), &mut rls.scratch_d, meter);
    if rls.scaling == TargetScaling::PseudoInverse {
        let energy = dotc(w, w).re;
        if !(energy > 0.0) {
            return Err(Error::Degenerate(format!("reduced-rank weights vanished at step {}", eq.steps)));
        }
        let inv = 1.0 / energy;
        for (t, &wc) in rls.t.iter_mut().zip(w) {
            *t = wc * inv;
        }
        meter.mul(w.len() as u64 * 2 + 1);
        meter.add(w.len() as u64 - 1);
    }

    let m = eq.s.nrows();
    let width = eq.s.ncols();
    let xc = x_ref.conj();
    let k = rls.k.as_slice();
    let data = eq.s.as_mut_slice();
    for c in 0..width {
        let col = &mut data[c * m..(c + 1) * m];
        let u = xc * rls.t[c].conj() - dotc(r, col);
        for (s, &kk) in col.iter_mut().zip(k) {
            *s += kk * u;
        }
    }
    meter.mul((2 * m * width + width) as u64);
    meter.add((2 * m * width) as u64);
    if !all_finite(eq.s.as_slice()) {
        return Err(Error::NonFinite { stage: "transformation matrix update", step: eq.steps });
    }
    Ok(())
}

/// Reduced-rank weight update from the projected input `r̄ = Sᴴr`.
/// Returns the a-priori error `ξ = x − w̄ᴴr̄`.
pub fn rls_update_w<M: Meter>(eq: &mut EqualizerState, rbar: &[C64], x_ref: C64, meter: &mut M) -> Result<C64> {
    let d = eq.w_bar.len();
    if rbar.len() != d {
        return Err(Error::Dimensions(format!("projected input length {} but width {d}", rbar.len())));
    }
    let rls = &mut eq.rls;
    lemma_update(&mut rls.phi_bar, rbar, rls.lambda, rls.k_bar.as_mut_slice(), &mut rls.scratch_d, meter);
    let xi = x_ref - dotc(eq.w_bar.as_slice(), rbar);
    let xic = xi.conj();
    for (w, &k) in eq.w_bar.iter_mut().zip(rls.k_bar.iter()) {
        *w += k * xic;
    }
    meter.mul(2 * d as u64);
    meter.add(2 * d as u64);
    if !all_finite(eq.w_bar.as_slice()) {
        return Err(Error::NonFinite { stage: "reduced-rank weight update", step: eq.steps });
    }
    Ok(xi)
}

/// One full cycle: transformation matrix, re-projection, weights, rank.
pub fn adapt_step(eq: &mut EqualizerState, r: &[C64], x_ref: C64) -> Result<AdaptDiagnostics> {
    adapt_step_metered(eq, r, x_ref, &mut NoMeter)
}

pub fn adapt_step_metered<M: Meter>(
    eq: &mut EqualizerState,
    r: &[C64],
    x_ref: C64,
    meter: &mut M,
) -> Result<AdaptDiagnostics> {
    check_len(eq, r)?;
    let a_priori_error = x_ref - active_output(eq, r);
    rls_update_s(eq, r, x_ref, meter)?;
    finish_cycle(eq, r, x_ref, a_priori_error, meter)
}

/// Cycle that takes the Kalman gain from a shared [`GainTracker`] instead of
/// the stream's own inverse covariance.
pub fn adapt_step_with_gain(eq: &mut EqualizerState, gain: &[C64], r: &[C64], x_ref: C64) -> Result<AdaptDiagnostics> {
    check_len(eq, r)?;
    if gain.len() != r.len() {
        return Err(Error::Dimensions("gain and input lengths differ".into()));
    }
    let a_priori_error = x_ref - active_output(eq, r);
    eq.rls.k.as_mut_slice().copy_from_slice(gain);
    transform_update(eq, r, x_ref, &mut NoMeter)?;
    finish_cycle(eq, r, x_ref, a_priori_error, &mut NoMeter)
}

fn finish_cycle<M: Meter>(
    eq: &mut EqualizerState,
    r: &[C64],
    x_ref: C64,
    a_priori_error: C64,
    meter: &mut M,
) -> Result<AdaptDiagnostics> {
    let mut rbar = std::mem::take(&mut eq.rls.rbar);
    let m = eq.s.nrows();
    let data = eq.s.as_slice();
    for (c, v) in rbar.iter_mut().enumerate() {
        *v = dotc(&data[c * m..(c + 1) * m], r);
    }
    meter.mul((m * rbar.len()) as u64);
    meter.add(((m - 1) * rbar.len()) as u64);
    let res = rls_update_w(eq, &rbar, x_ref, meter);
    if res.is_ok() {
        if let Some(cost) = eq.rank_cost.as_mut() {
            cost.update(eq.w_bar.as_slice(), &rbar, x_ref, meter);
            eq.rank = cost.select();
        }
    }
    eq.rls.rbar = rbar;
    res?;
    eq.steps += 1;
    Ok(AdaptDiagnostics { a_priori_error, rank: eq.rank })
}

fn active_output(eq: &EqualizerState, r: &[C64]) -> C64 {
    let m = eq.s.nrows();
    let data = eq.s.as_slice();
    (0..eq.rank).map(|c| eq.w_bar[c].conj() * dotc(&data[c * m..(c + 1) * m], r)).sum()
}

fn check_len(eq: &EqualizerState, r: &[C64]) -> Result<()> {
    if r.len() != eq.s.nrows() {
        return Err(Error::Dimensions(format!("input length {} but M={}", r.len(), eq.s.nrows())));
    }
    Ok(())
}

/// Conventional exponentially weighted RLS on the full stacked input.
#[derive(Debug, Clone)]
pub struct FullRankRls {
    pub gain: GainTracker,
    pub w: DVector<C64>,
    pub steps: u64,
}

impl FullRankRls {
    pub fn new(m: usize, lambda: f64, delta: f64) -> Result<Self> {
        Ok(Self { gain: GainTracker::new(m, lambda, delta)?, w: DVector::from_element(m, ZERO), steps: 0 })
    }

    /// Update with the stream's own gain; returns the a-priori error.
    pub fn step<M: Meter>(&mut self, r: &[C64], x_ref: C64, meter: &mut M) -> Result<C64> {
        if r.len() != self.w.len() {
            return Err(Error::Dimensions(format!("input length {} but M={}", r.len(), self.w.len())));
        }
        self.gain.update(r, meter);
        let k = std::mem::take(&mut self.gain.k);
        let res = self.apply(&k, r, x_ref, meter);
        self.gain.k = k;
        res
    }

    /// Update with an externally computed gain.
    pub fn step_with_gain(&mut self, gain: &[C64], r: &[C64], x_ref: C64) -> Result<C64> {
        self.apply(gain, r, x_ref, &mut NoMeter)
    }

    fn apply<M: Meter>(&mut self, k: &[C64], r: &[C64], x_ref: C64, meter: &mut M) -> Result<C64> {
        let e = x_ref - dotc(self.w.as_slice(), r);
        let ec = e.conj();
        for (w, &kk) in self.w.iter_mut().zip(k) {
            *w += kk * ec;
        }
        let m = r.len() as u64;
        meter.mul(2 * m);
        meter.add(2 * m);
        if !all_finite(self.w.as_slice()) {
            return Err(Error::NonFinite { stage: "full-rank weight update", step: self.steps });
        }
        self.steps += 1;
        Ok(e)
    }
}

impl Combiner for FullRankRls {
    fn composite_into(&self, out: &mut [C64]) {
        out.copy_from_slice(self.w.as_slice());
    }
}

/// Free-function form of [`FullRankRls::step`].
pub fn full_rank_rls_step<'a>(state: &'a mut FullRankRls, r: &[C64], x_ref: C64) -> Result<&'a DVector<C64>> {
    state.step(r, x_ref, &mut NoMeter)?;
    Ok(&state.w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptation::RankPolicy;
    use crate::channel::MimoDims;
    use crate::linalg::e1;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn unit_gain_example() {
        // P = I, λ = 1, r = e₁ gives k = e₁/2 and P = I − ½e₁e₁ᴴ.
        let mut g = GainTracker::new(3, 1.0, 1.0).unwrap();
        let k = g.update(e1(3).as_slice(), &mut NoMeter).to_vec();
        assert_eq!(k, vec![c(0.5, 0.0), ZERO, ZERO]);
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![c(0.5, 0.0), c(1.0, 0.0), c(1.0, 0.0)]));
        assert_eq!(g.p, expect);
    }

    #[test]
    fn zero_input_keeps_zero_weights() {
        let mut f = FullRankRls::new(4, 0.99, 0.01).unwrap();
        for _ in 0..20 {
            f.step(&[ZERO; 4], c(1.0, 0.0), &mut NoMeter).unwrap();
        }
        assert!(f.w.iter().all(|z| *z == ZERO));
    }

    #[test]
    fn first_full_rank_step_is_gain_times_reference() {
        let r = [c(0.3, -0.2), c(1.0, 0.5)];
        let x = c(-0.7, 0.7);
        let mut f = FullRankRls::new(2, 0.98, 0.1).unwrap();
        f.step(&r, x, &mut NoMeter).unwrap();
        // P[0] = 10·I, so k = 10r/(λ + 10|r|²).
        let den = 0.98 + 10.0 * (r[0].norm_sqr() + r[1].norm_sqr());
        for (w, rr) in f.w.iter().zip(&r) {
            assert!((w - rr * 10.0 / den * x.conj()).norm() < 1e-14);
        }
    }

    #[test]
    fn zero_prior_weights_take_gain_times_reference() {
        let dims = MimoDims::new(1, 3, 1, 1, 0).unwrap();
        let mut eq = EqualizerState::new(0, dims, RankPolicy::Fixed(2), 1.0, 1.0, TargetScaling::PseudoInverse).unwrap();
        eq.w_bar = DVector::from_element(2, ZERO);
        let rbar = [c(1.0, 0.0), c(0.0, 0.0)];
        let x = c(0.5, -1.5);
        rls_update_w(&mut eq, &rbar, x, &mut NoMeter).unwrap();
        assert_eq!(eq.rls.k_bar.as_slice(), &[c(0.5, 0.0), ZERO]);
        assert_eq!(eq.w_bar.as_slice(), &[c(0.5, 0.0) * x.conj(), ZERO]);
        assert_eq!(eq.rls.phi_bar[(0, 0)], c(0.5, 0.0));
        assert_eq!(eq.rls.phi_bar[(1, 1)], c(1.0, 0.0));
    }

    #[test]
    fn fixed_policy_keeps_rank() {
        let dims = MimoDims::new(2, 2, 1, 2, 1).unwrap();
        let mut eq = EqualizerState::new(0, dims, RankPolicy::Fixed(2), 0.99, 0.01, TargetScaling::PseudoInverse).unwrap();
        for i in 0..50 {
            let r: Vec<C64> = (0..dims.m()).map(|k| c(((i * 7 + k) as f64).sin(), ((i + 3 * k) as f64).cos())).collect();
            let d = adapt_step(&mut eq, &r, c(1.0, -1.0)).unwrap();
            assert_eq!(d.rank, 2);
        }
    }
}
