//! Transmit symbols, multipath MIMO fading channels and receive samples.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{C64, ZERO};
use crate::{Error, Result};

/// Number of sinusoids per fading tap.
pub const SINUSOIDS: usize = 32;

/// Relative tap powers of the vehicular A profile at symbol spacing, in dB.
pub const VEHICULAR_A_DB: [f64; 5] = [0.0, -1.0, -9.0, -10.0, -15.0];

/// Antenna counts and window sizes of the equalizer.
///
/// `b = 0` is allowed and means the stacked input carries no feedback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MimoDims {
    pub n_t: usize,
    pub n_r: usize,
    pub l_p: usize,
    pub l: usize,
    pub b: usize,
}

impl Default for MimoDims {
    fn default() -> Self {
        Self { n_t: 4, n_r: 8, l_p: 5, l: 8, b: 4 }
    }
}

impl MimoDims {
    pub fn new(n_t: usize, n_r: usize, l_p: usize, l: usize, b: usize) -> Result<Self> {
        let dims = Self { n_t, n_r, l_p, l, b };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_t == 0 || self.n_r == 0 || self.l_p == 0 || self.l == 0 {
            return Err(Error::Dimensions(format!("all counts must be positive: {self:?}")));
        }
        if self.l < self.l_p {
            return Err(Error::Dimensions(format!(
                "window l={} shorter than the channel l_p={}",
                self.l, self.l_p
            )));
        }
        Ok(())
    }

    /// Length of the received part of the stacked input, `l·n_r`.
    pub fn window_len(&self) -> usize {
        self.l * self.n_r
    }

    /// Length of the feedback part, `b·(n_t−1)`.
    pub fn feedback_len(&self) -> usize {
        self.b * (self.n_t - 1)
    }

    /// Stacked input length `M = l·n_r + b·(n_t−1)`.
    pub fn m(&self) -> usize {
        self.window_len() + self.feedback_len()
    }

    /// Same dimensions with the feedback removed.
    pub fn without_feedback(&self) -> Self {
        Self { b: 0, ..*self }
    }
}

/// Symbol alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Constellation {
    #[default]
    Qpsk,
}

impl Constellation {
    /// Points in tie-break order.
    pub fn points(&self) -> &'static [C64] {
        const S: f64 = FRAC_1_SQRT_2;
        const QPSK: [C64; 4] = [
            C64::new(S, S),
            C64::new(-S, S),
            C64::new(-S, -S),
            C64::new(S, -S),
        ];
        match self {
            Constellation::Qpsk => &QPSK,
        }
    }

    pub fn bits_per_symbol(&self) -> usize {
        match self {
            Constellation::Qpsk => 2,
        }
    }

    /// Gray label of a constellation point: one bit per quadrature sign.
    pub fn bits(&self, s: C64) -> u8 {
        match self {
            Constellation::Qpsk => u8::from(s.re < 0.0) | (u8::from(s.im < 0.0) << 1),
        }
    }

    /// Number of differing bits between the labels of two points.
    pub fn bit_errors(&self, a: C64, b: C64) -> u32 {
        (self.bits(a) ^ self.bits(b)).count_ones()
    }
}

/// Transmitted symbols, one row per transmit antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub symbols: DMatrix<C64>,
    pub constellation: Constellation,
}

impl SymbolFrame {
    /// Independent equiprobable symbols.
    pub fn random(n_t: usize, n_symbols: usize, constellation: Constellation, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = constellation.points();
        let symbols = DMatrix::from_fn(n_t, n_symbols, |_, _| points[rng.random_range(0..points.len())]);
        Self { symbols, constellation }
    }

    pub fn n_t(&self) -> usize {
        self.symbols.nrows()
    }

    pub fn len(&self) -> usize {
        self.symbols.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.ncols() == 0
    }

    /// `x_j[i]`, zero before the frame starts.
    #[inline]
    pub fn at(&self, j: usize, i: isize) -> C64 {
        if i < 0 {
            ZERO
        } else {
            self.symbols[(j, i as usize)]
        }
    }
}

/// Doppler rate and power delay profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FadingConfig {
    /// Normalized Doppler in cycles per symbol; zero freezes the channel.
    pub fd_t: f64,
    /// Average power of each path, linear scale.
    pub profile: Vec<f64>,
    pub rng_seed: u64,
}

impl FadingConfig {
    pub fn vehicular_a(fd_t: f64, rng_seed: u64) -> Self {
        Self { fd_t, profile: vehicular_a_profile(), rng_seed }
    }
}

/// Vehicular A powers normalized to unit total power.
pub fn vehicular_a_profile() -> Vec<f64> {
    let lin: Vec<f64> = VEHICULAR_A_DB.iter().map(|db| 10f64.powf(db / 10.0)).collect();
    let total: f64 = lin.iter().sum();
    lin.into_iter().map(|p| p / total).collect()
}

/// Time-varying tap gains `h_{j,k,l}[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub dims: MimoDims,
    n_symbols: usize,
    /// Index `((i·n_t + j)·n_r + k)·l_p + l`.
    taps: Vec<C64>,
}

impl ChannelRealization {
    /// A channel that does not change over the frame. `gains` is indexed
    /// `(j·n_r + k)·l_p + l`.
    pub fn from_static(dims: MimoDims, n_symbols: usize, gains: &[C64]) -> Result<Self> {
        let per = dims.n_t * dims.n_r * dims.l_p;
        if gains.len() != per {
            return Err(Error::Dimensions(format!("expected {per} gains, got {}", gains.len())));
        }
        let mut taps = Vec::with_capacity(per * n_symbols);
        for _ in 0..n_symbols {
            taps.extend_from_slice(gains);
        }
        Ok(Self { dims, n_symbols, taps })
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    #[inline]
    fn index(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        let d = &self.dims;
        ((i * d.n_t + j) * d.n_r + k) * d.l_p + l
    }

    /// `h_{j,k,l}[i]`: transmit `j`, receive `k`, path `l`.
    #[inline]
    pub fn tap(&self, i: usize, j: usize, k: usize, l: usize) -> C64 {
        self.taps[self.index(i, j, k, l)]
    }

    /// All `l_p` taps of link `(j, k)` at instant `i`.
    pub fn link(&self, i: usize, j: usize, k: usize) -> &[C64] {
        let start = self.index(i, j, k, 0);
        &self.taps[start..start + self.dims.l_p]
    }
}

/// Clarke fading by a sum of sinusoids per tap.
///
/// Each tap is `√(P_l/N)·Σ_n exp(i(2π·fd_t·cos α_n·t + φ_n))` with
/// `α_n = 2π(n + ¼)/N` and independent uniform phases. The quarter offset
/// keeps every Doppler shift distinct.
pub fn generate_fading(config: &FadingConfig, dims: MimoDims, n_symbols: usize) -> Result<ChannelRealization> {
    dims.validate()?;
    if n_symbols == 0 {
        return Err(Error::Parameter("n_symbols must be at least 1".into()));
    }
    if config.profile.len() != dims.l_p {
        return Err(Error::Parameter(format!(
            "profile has {} taps, channel has l_p={}",
            config.profile.len(),
            dims.l_p
        )));
    }
    if !(config.fd_t >= 0.0 && config.fd_t.is_finite()) {
        return Err(Error::Parameter(format!("fd_t must be finite and non-negative, got {}", config.fd_t)));
    }
    let total: f64 = config.profile.iter().sum();
    if !(total.is_finite() && total > 0.0) || config.profile.iter().any(|&p| p < 0.0) {
        return Err(Error::Parameter("profile powers must be non-negative with a positive sum".into()));
    }

    let omegas: Vec<f64> = (0..SINUSOIDS)
        .map(|n| {
            let alpha = 2.0 * PI * (n as f64 + 0.25) / SINUSOIDS as f64;
            2.0 * PI * config.fd_t * alpha.cos()
        })
        .collect();
    let steps: Vec<C64> = omegas.iter().map(|&w| C64::from_polar(1.0, w)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let per = dims.n_t * dims.n_r * dims.l_p;
    let mut taps = vec![ZERO; per * n_symbols];
    let mut phasors = vec![ZERO; SINUSOIDS];
    // Re-anchor the rotating phasors periodically so rounding cannot drift.
    const ANCHOR: usize = 256;

    for j in 0..dims.n_t {
        for k in 0..dims.n_r {
            for (l, &power) in config.profile.iter().enumerate() {
                let phases: Vec<f64> = (0..SINUSOIDS).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
                let amp = (power / SINUSOIDS as f64).sqrt();
                let slot = (j * dims.n_r + k) * dims.l_p + l;
                for i in 0..n_symbols {
                    if i % ANCHOR == 0 {
                        for n in 0..SINUSOIDS {
                            phasors[n] = C64::from_polar(1.0, omegas[n] * i as f64 + phases[n]);
                        }
                    } else {
                        for (z, s) in phasors.iter_mut().zip(&steps) {
                            *z *= s;
                        }
                    }
                    let sum: C64 = phasors.iter().sum();
                    taps[i * per + slot] = sum * amp;
                }
            }
        }
    }
    Ok(ChannelRealization { dims, n_symbols, taps })
}

/// Block-Toeplitz channel matrix at instant `i`, size `(l·n_r) × (l·n_t)`.
///
/// Block `(k, j)` has `h_{j,k,r−c}` at `(r, c)`. It maps an oldest-first
/// stack of transmit symbols to an oldest-first stack of receive samples,
/// with interference from before the window truncated.
pub fn assemble_channel_matrix(realization: &ChannelRealization, i: usize) -> Result<DMatrix<C64>> {
    if i >= realization.n_symbols {
        return Err(Error::Parameter(format!("instant {i} outside frame of {}", realization.n_symbols)));
    }
    let d = realization.dims;
    let mut h = DMatrix::from_element(d.l * d.n_r, d.l * d.n_t, ZERO);
    for k in 0..d.n_r {
        for j in 0..d.n_t {
            let taps = realization.link(i, j, k);
            for c in 0..d.l {
                for (lag, &g) in taps.iter().enumerate() {
                    let r = c + lag;
                    if r < d.l {
                        h[(k * d.l + r, j * d.l + c)] = g;
                    }
                }
            }
        }
    }
    Ok(h)
}

/// Channel output without noise: `Σ_j Σ_l h_{j,k,l}[i]·x_j[i−l]`.
pub fn noiseless_received(realization: &ChannelRealization, frame: &SymbolFrame) -> Result<DMatrix<C64>> {
    let d = realization.dims;
    if frame.n_t() != d.n_t {
        return Err(Error::Dimensions(format!("frame has {} streams, channel {}", frame.n_t(), d.n_t)));
    }
    if frame.is_empty() || frame.len() > realization.n_symbols {
        return Err(Error::Dimensions(format!(
            "frame length {} not in 1..={}",
            frame.len(),
            realization.n_symbols
        )));
    }
    let n = frame.len();
    let mut y = DMatrix::from_element(d.n_r, n, ZERO);
    for i in 0..n {
        for k in 0..d.n_r {
            let mut acc = ZERO;
            for j in 0..d.n_t {
                for (l, &g) in realization.link(i, j, k).iter().enumerate() {
                    acc += g * frame.at(j, i as isize - l as isize);
                }
            }
            y[(k, i)] = acc;
        }
    }
    Ok(y)
}

/// Circular complex Gaussian noise of variance `noise_var` per entry.
pub fn complex_noise(rows: usize, cols: usize, noise_var: f64, seed: u64) -> Result<DMatrix<C64>> {
    if !(noise_var >= 0.0) {
        return Err(Error::Parameter(format!("noise variance must be non-negative, got {noise_var}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = (noise_var / 2.0).sqrt();
    Ok(DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * s, im * s)
    }))
}

/// Noisy receive samples, `n_r × n_symbols`.
pub fn received_samples(
    realization: &ChannelRealization,
    frame: &SymbolFrame,
    noise_var: f64,
    rng_seed: u64,
) -> Result<DMatrix<C64>> {
    let noise = complex_noise(realization.dims.n_r, frame.len(), noise_var, rng_seed)?;
    Ok(noiseless_received(realization, frame)? + noise)
}

/// `[y₁[i]…y₁[i−l+1], …, y_{n_r}[i]…y_{n_r}[i−l+1]]`, newest first per
/// antenna, zero before the frame.
pub fn stack_received(received: &DMatrix<C64>, i: usize, dims: MimoDims) -> Vec<C64> {
    let mut out = vec![ZERO; dims.window_len()];
    stack_received_into(received, i, dims, &mut out);
    out
}

pub fn stack_received_into(received: &DMatrix<C64>, i: usize, dims: MimoDims, out: &mut [C64]) {
    debug_assert_eq!(out.len(), dims.window_len());
    for k in 0..dims.n_r {
        for a in 0..dims.l {
            out[k * dims.l + a] = if a <= i { received[(k, i - a)] } else { ZERO };
        }
    }
}

/// Oldest-first transmit stack `[x_j[i−l+1] … x_j[i]]` for each `j`, the
/// ordering on which [`assemble_channel_matrix`] acts.
pub fn stack_transmit_oldest_first(frame: &SymbolFrame, i: usize, l: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(frame.n_t() * l);
    for j in 0..frame.n_t() {
        for c in 0..l {
            out.push(frame.at(j, i as isize - (l - 1 - c) as isize));
        }
    }
    out
}

/// Per-tone `n_r × n_t` responses `H_n(k,j) = Σ_l h_{j,k,l}[i]·e^{−2πi·n·l/N}`.
pub fn ofdm_subcarrier_channels(
    realization: &ChannelRealization,
    i: usize,
    n_subcarriers: usize,
) -> Result<Vec<DMatrix<C64>>> {
    let d = realization.dims;
    if n_subcarriers < d.l_p {
        return Err(Error::Parameter(format!(
            "{n_subcarriers} subcarriers cannot resolve {} taps",
            d.l_p
        )));
    }
    if i >= realization.n_symbols {
        return Err(Error::Parameter(format!("instant {i} outside frame")));
    }
    let twiddle = |n: usize, l: usize| {
        let e = (n * l) % n_subcarriers;
        C64::from_polar(1.0, -2.0 * PI * e as f64 / n_subcarriers as f64)
    };
    Ok((0..n_subcarriers)
        .map(|n| {
            DMatrix::from_fn(d.n_r, d.n_t, |k, j| {
                realization
                    .link(i, j, k)
                    .iter()
                    .enumerate()
                    .map(|(l, &g)| g * twiddle(n, l))
                    .sum()
            })
        })
        .collect())
}
