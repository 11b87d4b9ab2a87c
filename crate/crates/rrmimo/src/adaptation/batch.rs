//! Closed-form alternating least-squares design on a stored data block.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::check_lambda_delta;
use crate::linalg::{C64, ONE, ZERO};
use crate::{Error, Result};

/// Exponentially weighted statistics of one data block.
///
/// `r` and `p` hold the data terms only. The regularization seed enters as
/// `ridge·I` (the seed `δ` decayed over the block, `λⁿ·δ`), so every design
/// step and [`evaluate_ses`] work with `R + ridge·I`. Setting `ridge` to zero
/// makes the SES the plain data cost.
#[derive(Debug, Clone)]
pub struct BatchLsWorkspace {
    pub r: DMatrix<C64>,
    pub p: DVector<C64>,
    pub sigma2_x: f64,
    pub ridge: f64,
    pub delta: f64,
    pub lambda: f64,
    /// `p·w̄ᴴ + δ·(R + ridge·I)·S_prev`.
    pub p_d: DMatrix<C64>,
    /// `δ·I + w̄w̄ᴴ`.
    pub r_w: DMatrix<C64>,
    /// `S_prevᴴ·p`.
    pub p_bar: DVector<C64>,
}

impl BatchLsWorkspace {
    pub fn from_block<V: AsRef<[C64]>>(inputs: &[V], refs: &[C64], lambda: f64, delta: f64) -> Result<Self> {
        check_lambda_delta(lambda, delta)?;
        if inputs.is_empty() || inputs.len() != refs.len() {
            return Err(Error::Dimensions(format!("{} inputs for {} references", inputs.len(), refs.len())));
        }
        let m = inputs[0].as_ref().len();
        let mut r = DMatrix::from_element(m, m, ZERO);
        let mut p = DVector::from_element(m, ZERO);
        let mut sigma2_x = 0.0;
        for (v, &x) in inputs.iter().zip(refs) {
            let v = v.as_ref();
            if v.len() != m {
                return Err(Error::Dimensions("inputs of unequal length".into()));
            }
            r *= C64::new(lambda, 0.0);
            p *= C64::new(lambda, 0.0);
            sigma2_x = lambda * sigma2_x + x.norm_sqr();
            let rv = DVector::from_column_slice(v);
            r.ger(ONE, &rv, &rv.conjugate(), ONE);
            p.axpy(x.conj(), &rv, ONE);
        }
        let ridge = lambda.powi(inputs.len() as i32) * delta;
        Ok(Self {
            r,
            p,
            sigma2_x,
            ridge,
            delta,
            lambda,
            p_d: DMatrix::zeros(m, 0),
            r_w: DMatrix::zeros(0, 0),
            p_bar: DVector::zeros(0),
        })
    }

    pub fn m(&self) -> usize {
        self.p.len()
    }

    /// `R + ridge·I`.
    pub fn regularized(&self) -> DMatrix<C64> {
        let mut r = self.r.clone();
        for i in 0..r.nrows() {
            r[(i, i)] += self.ridge;
        }
        r
    }

    /// Refresh `P_D`, `R_w̄` and `p̄` around the previous iterate.
    pub fn set_weight_statistics(&mut self, s_prev: &DMatrix<C64>, w_prev: &DVector<C64>) {
        let d = w_prev.len();
        let delta = C64::new(self.delta, 0.0);
        self.p_d = &self.p * w_prev.adjoint() + self.regularized() * s_prev * delta;
        self.r_w = DMatrix::from_diagonal_element(d, d, delta) + w_prev * w_prev.adjoint();
        self.p_bar = s_prev.adjoint() * &self.p;
    }
}

/// `S = (R + ridge·I)⁻¹·P_D·R_w̄⁻¹` from the current workspace statistics.
///
/// With the `δ·R·S_prev` seed inside `P_D` this step minimizes the SES plus
/// a proximal term around `S_prev`, so alternation never increases the SES.
/// A zero `P_D` yields `S = 0`; see [`is_degenerate`].
pub fn batch_design_s(ws: &BatchLsWorkspace) -> Result<DMatrix<C64>> {
    if ws.p_d.ncols() == 0 {
        return Err(Error::Parameter("weight statistics not set".into()));
    }
    let chol_r = Cholesky::new(ws.regularized()).ok_or(Error::Singular("input covariance"))?;
    let chol_w = Cholesky::new(ws.r_w.clone()).ok_or(Error::Singular("weight accumulator"))?;
    let left = chol_r.solve(&ws.p_d);
    // left·R_w̄⁻¹ = (R_w̄⁻¹·leftᴴ)ᴴ since R_w̄ is Hermitian.
    Ok(chol_w.solve(&left.adjoint()).adjoint())
}

/// `w̄ = (Sᴴ(R + ridge·I)S)⁻¹·Sᴴp`.
pub fn batch_design_w(ws: &BatchLsWorkspace, s: &DMatrix<C64>) -> Result<DVector<C64>> {
    let rbar = s.adjoint() * ws.regularized() * s;
    let pbar = s.adjoint() * &ws.p;
    let chol = Cholesky::new(rbar).ok_or(Error::Singular("reduced covariance"))?;
    Ok(chol.solve(&pbar))
}

/// `σ²_x − 2·Re(w̄ᴴSᴴp) + w̄ᴴSᴴ(R + ridge·I)Sw̄`.
pub fn evaluate_ses(ws: &BatchLsWorkspace, s: &DMatrix<C64>, w: &DVector<C64>) -> f64 {
    let f = s * w;
    let cross = f.dotc(&ws.p).re;
    let quad = f.dotc(&(ws.regularized() * &f)).re;
    ws.sigma2_x - 2.0 * cross + quad
}

pub fn is_degenerate(s: &DMatrix<C64>) -> bool {
    s.iter().all(|z| *z == ZERO)
}

/// Output of [`alternate`].
#[derive(Debug, Clone)]
pub struct Alternation {
    pub s: DMatrix<C64>,
    pub w: DVector<C64>,
    /// SES of the starting point followed by the SES after each sweep.
    pub ses_trace: Vec<f64>,
}

/// Alternate the `S` and `w̄` designs for `n_sweeps` sweeps.
pub fn alternate(
    ws: &mut BatchLsWorkspace,
    s0: &DMatrix<C64>,
    w0: &DVector<C64>,
    n_sweeps: usize,
) -> Result<Alternation> {
    if w0.iter().all(|z| *z == ZERO) {
        return Err(Error::Parameter("initial reduced-rank weights must be nonzero".into()));
    }
    if s0.nrows() != ws.m() || s0.ncols() != w0.len() {
        return Err(Error::Dimensions(format!("S is {:?}, w̄ has {} entries, M={}", s0.shape(), w0.len(), ws.m())));
    }
    let mut s = s0.clone();
    let mut w = w0.clone();
    let mut ses_trace = vec![evaluate_ses(ws, &s, &w)];
    for sweep in 0..n_sweeps {
        ws.set_weight_statistics(&s, &w);
        s = batch_design_s(ws)?;
        if is_degenerate(&s) {
            return Err(Error::Degenerate(format!("S collapsed to zero in sweep {sweep}")));
        }
        w = batch_design_w(ws, &s)?;
        ses_trace.push(evaluate_ses(ws, &s, &w));
    }
    Ok(Alternation { s, w, ses_trace })
}
