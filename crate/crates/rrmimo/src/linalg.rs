//! Dense complex kernels shared by the recursions, plus an optional
//! arithmetic meter.
//!
//! Counting convention: one complex multiply (or a real-by-complex scale, or
//! a division) is one multiplication; one complex add or subtract is one
//! addition.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

pub type C64 = Complex<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Arithmetic sink for the update equations.
pub trait Meter {
    fn mul(&mut self, n: u64);
    fn add(&mut self, n: u64);
}

/// Meter that discards everything; compiles away.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoMeter;

impl Meter for NoMeter {
    #[inline(always)]
    fn mul(&mut self, _: u64) {}
    #[inline(always)]
    fn add(&mut self, _: u64) {}
}

/// Running totals of multiplications and additions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounter {
    pub multiplications: u64,
    pub additions: u64,
}

impl Meter for OpCounter {
    #[inline]
    fn mul(&mut self, n: u64) {
        self.multiplications += n;
    }
    #[inline]
    fn add(&mut self, n: u64) {
        self.additions += n;
    }
}

/// `Σ conj(a_i)·b_i`.
#[inline]
pub fn dotc(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = ZERO;
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * y;
    }
    acc
}

/// `out = A·x` for a column-major `A`.
pub fn mat_vec<M: Meter>(a: &DMatrix<C64>, x: &[C64], out: &mut [C64], meter: &mut M) {
    let (rows, cols) = a.shape();
    debug_assert_eq!(cols, x.len());
    debug_assert_eq!(rows, out.len());
    out.fill(ZERO);
    let data = a.as_slice();
    for (c, &xc) in x.iter().enumerate() {
        let col = &data[c * rows..(c + 1) * rows];
        for (o, &v) in out.iter_mut().zip(col) {
            *o += v * xc;
        }
    }
    meter.mul((rows * cols) as u64);
    meter.add((rows * cols.saturating_sub(1)) as u64);
}

/// `out = Aᴴ·x` for a column-major `A`.
pub fn adjoint_mat_vec<M: Meter>(a: &DMatrix<C64>, x: &[C64], out: &mut [C64], meter: &mut M) {
    let (rows, cols) = a.shape();
    debug_assert_eq!(rows, x.len());
    debug_assert_eq!(cols, out.len());
    let data = a.as_slice();
    for (c, o) in out.iter_mut().enumerate() {
        *o = dotc(&data[c * rows..(c + 1) * rows], x);
    }
    meter.mul((rows * cols) as u64);
    meter.add((rows.saturating_sub(1) * cols) as u64);
}

/// Rank-one inverse update by the matrix inversion lemma.
///
/// With `A` Hermitian and `g = A·v`, computes the gain `k = g/(λ + vᴴg)` and
/// replaces `A` by `(A − k·gᴴ)/λ`. Only the upper triangle is computed and
/// then mirrored, which is the same as averaging with the adjoint since the
/// denominator is real. Returns the denominator.
pub fn lemma_update<M: Meter>(
    a: &mut DMatrix<C64>,
    v: &[C64],
    lambda: f64,
    gain: &mut [C64],
    g: &mut [C64],
    meter: &mut M,
) -> f64 {
    let n = v.len();
    debug_assert_eq!(a.shape(), (n, n));
    mat_vec(a, v, g, meter);
    let den = lambda + dotc(v, g).re;
    meter.mul(n as u64);
    meter.add(n as u64);
    let inv_den = 1.0 / den;
    for (k, &gi) in gain.iter_mut().zip(g.iter()) {
        *k = gi * inv_den;
    }
    meter.mul(n as u64 + 1);

    let inv_lambda = 1.0 / lambda;
    let data = a.as_mut_slice();
    for c in 0..n {
        let gc = g[c].conj();
        for r in 0..=c {
            let idx = c * n + r;
            data[idx] = (data[idx] - gain[r] * gc) * inv_lambda;
        }
        data[c * n + c].im = 0.0;
    }
    for c in 0..n {
        for r in (c + 1)..n {
            data[c * n + r] = data[r * n + c].conj();
        }
    }
    let tri = (n * (n + 1) / 2) as u64;
    meter.mul(2 * tri + 1);
    meter.add(tri);
    den
}

/// `δ⁻¹·I` of size `n`.
pub fn scaled_identity(n: usize, delta: f64) -> DMatrix<C64> {
    DMatrix::from_diagonal_element(n, n, C64::new(1.0 / delta, 0.0))
}

/// `[I_d; 0]`, the `m × d` leading-columns embedding.
pub fn identity_embedding(m: usize, d: usize) -> DMatrix<C64> {
    DMatrix::from_fn(m, d, |r, c| if r == c { ONE } else { ZERO })
}

/// First canonical basis vector of length `d`.
pub fn e1(d: usize) -> DVector<C64> {
    DVector::from_fn(d, |r, _| if r == 0 { ONE } else { ZERO })
}

/// Largest entry of `|A − Aᴴ|`.
pub fn hermitian_defect(a: &DMatrix<C64>) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for c in 0..n {
        for r in 0..n {
            worst = worst.max((a[(r, c)] - a[(c, r)].conj()).norm());
        }
    }
    worst
}

pub fn all_finite(v: &[C64]) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}
