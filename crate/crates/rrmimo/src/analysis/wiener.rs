//! Reduced-rank Wiener filter from the eigen-decomposition of `R`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::equalizer::EqualizerState;
use crate::linalg::{hermitian_defect, C64};
use crate::{Error, Result};

/// MMSE filter constrained to the dominant-`d` eigenspace of `R`.
#[derive(Debug, Clone)]
pub struct WienerOracle {
    pub r: DMatrix<C64>,
    pub p: DVector<C64>,
    pub sigma2_x: f64,
    pub rank: usize,
    pub w_opt: DVector<C64>,
    /// Retained eigenvectors, `M × d`, orthonormal columns.
    pub subspace: DMatrix<C64>,
    /// All eigenvalues, descending.
    pub eigenvalues: DVector<f64>,
    /// All eigenvectors in the same order.
    pub eigenvectors: DMatrix<C64>,
    pub mmse: f64,
}

/// Builds the oracle by whitening with `R^{−1/2}`, keeping the leading `d`
/// eigen-coordinates of `R^{−1/2}p`, and mapping back.
pub fn wiener_reduced_rank(r: &DMatrix<C64>, p: &DVector<C64>, d: usize, sigma2_x: f64) -> Result<WienerOracle> {
    let m = r.nrows();
    if r.ncols() != m || p.len() != m {
        return Err(Error::Dimensions(format!("R is {:?}, p has {}", r.shape(), p.len())));
    }
    if d == 0 || d > m {
        return Err(Error::Parameter(format!("rank {d} outside 1..={m}")));
    }
    let scale = r.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    if hermitian_defect(r) > 1e-10 * scale {
        return Err(Error::Parameter("covariance is not Hermitian".into()));
    }
    let eig = SymmetricEigen::new(r.clone());
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = DVector::from_iterator(m, order.iter().map(|&i| eig.eigenvalues[i]));
    let eigenvectors = DMatrix::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>());
    let smallest = eigenvalues[m - 1];
    if !(smallest > 1e-14 * eigenvalues[0].abs().max(f64::MIN_POSITIVE)) {
        return Err(Error::Parameter(format!("covariance is not positive definite (smallest eigenvalue {smallest:e})")));
    }

    // R^{-1/2}p in eigen-coordinates, truncated, then R^{-1/2} again.
    let mut coords = eigenvectors.adjoint() * p;
    for (i, c) in coords.iter_mut().enumerate() {
        *c = if i < d { *c / eigenvalues[i].sqrt() } else { C64::new(0.0, 0.0) };
    }
    for (i, c) in coords.iter_mut().enumerate().take(d) {
        *c /= eigenvalues[i].sqrt();
    }
    let w_opt = &eigenvectors * coords;
    let mmse = sigma2_x - p.dotc(&w_opt).re;
    Ok(WienerOracle {
        r: r.clone(),
        p: p.clone(),
        sigma2_x,
        rank: d,
        w_opt,
        subspace: eigenvectors.columns(0, d).into_owned(),
        eigenvalues,
        eigenvectors,
        mmse,
    })
}

impl WienerOracle {
    /// `σ²_x − 2·Re(wᴴp) + wᴴRw`.
    pub fn mse(&self, w: &DVector<C64>) -> f64 {
        self.sigma2_x - 2.0 * w.dotc(&self.p).re + w.dotc(&(&self.r * w)).re
    }

    /// `Φ₁·Λ₁⁻¹·Φ₁ᴴ·p`, the same filter written directly in the eigenbasis.
    pub fn eigen_form(&self) -> DVector<C64> {
        let lam = self.eigenvalues.rows(0, self.rank).map(|v| C64::new(1.0 / v, 0.0));
        let coords = (self.subspace.adjoint() * &self.p).component_mul(&lam);
        &self.subspace * coords
    }

    /// Full `R^{−1/2}`.
    pub fn inverse_sqrt(&self) -> DMatrix<C64> {
        let scale = self.eigenvalues.map(|v| C64::new(1.0 / v.sqrt(), 0.0));
        let mut scaled = self.eigenvectors.clone();
        for (c, s) in scale.iter().enumerate() {
            scaled.column_mut(c).scale_mut(s.re);
        }
        scaled * self.eigenvectors.adjoint()
    }
}

/// Distance of an adapted state from the oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceMetric {
    /// `‖S·w̄ − w_opt‖/‖w_opt‖`.
    pub filter_error: f64,
    /// Largest principal angle between `col(S)` and the oracle subspace, radians.
    pub subspace_angle: f64,
    /// MSE of the composite filter under the oracle statistics minus the MMSE.
    pub mse_gap: f64,
}

pub fn convergence_metric(state: &EqualizerState, oracle: &WienerOracle) -> Result<ConvergenceMetric> {
    if state.m() != oracle.r.nrows() || state.rank != oracle.rank {
        return Err(Error::Dimensions(format!(
            "state (M={}, d={}) vs oracle (M={}, d={})",
            state.m(),
            state.rank,
            oracle.r.nrows(),
            oracle.rank
        )));
    }
    let w = state.composite();
    let filter_error = (&w - &oracle.w_opt).norm() / oracle.w_opt.norm();
    let subspace_angle = largest_principal_angle(&state.active_transform(), &oracle.subspace);
    let mse_gap = oracle.mse(&w) - oracle.mmse;
    Ok(ConvergenceMetric { filter_error, subspace_angle, mse_gap })
}

/// Largest principal angle between the column spaces of `a` and `b`.
pub fn largest_principal_angle(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let qa = a.clone().qr().q();
    let qb = b.clone().qr().q();
    let sv = (qa.adjoint() * qb).singular_values();
    let smallest = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    smallest.clamp(0.0, 1.0).acos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::e1;

    #[test]
    fn identity_covariance() {
        let r = DMatrix::<C64>::identity(4, 4);
        let o = wiener_reduced_rank(&r, &e1(4), 1, 1.0).unwrap();
        assert!((&o.w_opt - e1(4)).norm() < 1e-15);
        assert!(o.mmse.abs() < 1e-15);
    }

    #[test]
    fn rejects_indefinite_or_non_hermitian() {
        let mut r = DMatrix::<C64>::identity(3, 3);
        r[(2, 2)] = C64::new(-1.0, 0.0);
        assert!(wiener_reduced_rank(&r, &e1(3), 1, 1.0).is_err());
        let mut r2 = DMatrix::<C64>::identity(3, 3);
        r2[(0, 1)] = C64::new(0.5, 0.0);
        assert!(wiener_reduced_rank(&r2, &e1(3), 1, 1.0).is_err());
    }
}
