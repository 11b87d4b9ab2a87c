//! Reduced-rank equalizer structure: stacking, projection, combining,
//! slicing and two-pass parallel decision feedback.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::adaptation::{RankCost, RankPolicy, RlsState, TargetScaling};
use crate::channel::{Constellation, MimoDims};
use crate::linalg::{dotc, e1, identity_embedding, C64, ZERO};
use crate::{Error, Result};

/// Equalizer structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Dfe,
    Linear,
}

/// Per-stream adaptive state: transformation matrix, reduced-rank weights
/// and the recursions behind them.
///
/// Under [`RankPolicy::Auto`] the stored `s` and `w_bar` are the extended
/// filters of width `d_max`; the active filter is their leading `rank`
/// columns and entries.
#[derive(Debug, Clone)]
pub struct EqualizerState {
    pub stream: usize,
    pub dims: MimoDims,
    pub s: DMatrix<C64>,
    pub w_bar: DVector<C64>,
    pub rank: usize,
    pub policy: RankPolicy,
    pub rls: RlsState,
    pub rank_cost: Option<RankCost>,
    pub steps: u64,
}

impl EqualizerState {
    /// Paper initialization: `S = [I; 0]`, `w̄ = e₁`, inverses seeded with
    /// `δ⁻¹·I`.
    pub fn new(
        stream: usize,
        dims: MimoDims,
        policy: RankPolicy,
        lambda: f64,
        delta: f64,
        scaling: TargetScaling,
    ) -> Result<Self> {
        let width = policy.width();
        Self::with_transform(stream, dims, policy, lambda, delta, scaling, identity_embedding(dims.m(), width))
    }

    /// Same as [`EqualizerState::new`] with a caller-supplied initial `S`.
    pub fn with_transform(
        stream: usize,
        dims: MimoDims,
        policy: RankPolicy,
        lambda: f64,
        delta: f64,
        scaling: TargetScaling,
        s0: DMatrix<C64>,
    ) -> Result<Self> {
        let m = dims.m();
        policy.validate(m)?;
        if stream >= dims.n_t {
            return Err(Error::Dimensions(format!("stream {stream} out of {} streams", dims.n_t)));
        }
        let width = policy.width();
        if s0.shape() != (m, width) {
            return Err(Error::Dimensions(format!("S must be {m}x{width}, got {:?}", s0.shape())));
        }
        if s0.iter().all(|z| *z == ZERO) {
            return Err(Error::Degenerate("initial transformation matrix is all zeros".into()));
        }
        let rls = RlsState::new(m, width, lambda, delta, scaling)?;
        let rank_cost = match policy {
            RankPolicy::Fixed(_) => None,
            RankPolicy::Auto { d_min, d_max } => Some(RankCost::new(d_min, d_max, lambda)),
        };
        Ok(Self {
            stream,
            dims,
            s: s0,
            w_bar: e1(width),
            rank: policy.initial_rank(),
            policy,
            rls,
            rank_cost,
            steps: 0,
        })
    }

    pub fn m(&self) -> usize {
        self.s.nrows()
    }

    /// Composite `M`-dimensional filter `S_d·w̄_d` of the active rank.
    pub fn composite(&self) -> DVector<C64> {
        let mut w = DVector::from_element(self.m(), ZERO);
        self.composite_into(w.as_mut_slice());
        w
    }

    pub fn composite_into(&self, out: &mut [C64]) {
        let m = self.m();
        out.fill(ZERO);
        let data = self.s.as_slice();
        for c in 0..self.rank {
            let wc = self.w_bar[c];
            for (o, &v) in out.iter_mut().zip(&data[c * m..(c + 1) * m]) {
                *o += v * wc;
            }
        }
    }

    pub fn active_transform(&self) -> DMatrix<C64> {
        self.s.columns(0, self.rank).into_owned()
    }

    pub fn active_weights(&self) -> DVector<C64> {
        self.w_bar.rows(0, self.rank).into_owned()
    }
}

/// Anything that combines a stacked input into a scalar through an
/// `M`-dimensional composite filter.
pub trait Combiner {
    fn composite_into(&self, out: &mut [C64]);
}

impl Combiner for EqualizerState {
    fn composite_into(&self, out: &mut [C64]) {
        EqualizerState::composite_into(self, out)
    }
}

/// Past final decisions for the feedback segment.
#[derive(Debug, Clone)]
pub struct FeedbackBuffer {
    n_t: usize,
    b: usize,
    /// Newest first; holds instants `i−1 … i−b+1`.
    history: VecDeque<Vec<C64>>,
}

impl FeedbackBuffer {
    pub fn new(dims: MimoDims) -> Self {
        Self { n_t: dims.n_t, b: dims.b, history: VecDeque::with_capacity(dims.b) }
    }

    /// Record the final decisions of the instant just processed.
    pub fn push(&mut self, decisions: &[C64]) {
        debug_assert_eq!(decisions.len(), self.n_t);
        if self.b <= 1 {
            return;
        }
        if self.history.len() == self.b - 1 {
            self.history.pop_back();
        }
        self.history.push_front(decisions.to_vec());
    }

    /// Feedback segment `x̂_{T,j}` of length `b·(n_t−1)`: newest block first,
    /// streams ascending with `j` left out. `current` fills the block for
    /// the present instant.
    pub fn extract_into(&self, j: usize, current: &[C64], out: &mut [C64]) {
        debug_assert_eq!(out.len(), self.b * (self.n_t - 1));
        let mut pos = 0;
        for blk in 0..self.b {
            let src: Option<&[C64]> = if blk == 0 { Some(current) } else { self.history.get(blk - 1).map(|v| v.as_slice()) };
            for s in (0..self.n_t).filter(|&s| s != j) {
                out[pos] = src.map_or(ZERO, |v| v[s]);
                pos += 1;
            }
        }
    }

    pub fn extract(&self, j: usize, current: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.b * (self.n_t - 1)];
        self.extract_into(j, current, &mut out);
        out
    }
}

/// Stacked input `r_j = [y; x̂_{T,j}]`.
///
/// `current` carries the present-instant decisions used in the second pass;
/// `None` means the first pass, whose feedback segment is all zeros. Linear
/// mode always zeros the feedback.
pub fn build_stacked_input(
    y_stack: &[C64],
    fb: &FeedbackBuffer,
    j: usize,
    mode: Mode,
    current: Option<&[C64]>,
) -> Result<DVector<C64>> {
    if j >= fb.n_t {
        return Err(Error::Dimensions(format!("stream {j} out of {}", fb.n_t)));
    }
    if let Some(c) = current {
        if c.len() != fb.n_t {
            return Err(Error::Dimensions(format!("{} current decisions for {} streams", c.len(), fb.n_t)));
        }
    }
    let fb_len = fb.b * (fb.n_t - 1);
    let mut r = DVector::from_element(y_stack.len() + fb_len, ZERO);
    r.as_mut_slice()[..y_stack.len()].copy_from_slice(y_stack);
    if let (Mode::Dfe, Some(cur)) = (mode, current) {
        fb.extract_into(j, cur, &mut r.as_mut_slice()[y_stack.len()..]);
    }
    Ok(r)
}

/// `r̄ = Sᴴ·r` over the active rank.
pub fn project(state: &EqualizerState, r: &[C64]) -> Result<DVector<C64>> {
    if r.len() != state.m() {
        return Err(Error::Dimensions(format!("input length {} but M={}", r.len(), state.m())));
    }
    let m = state.m();
    let data = state.s.as_slice();
    Ok(DVector::from_fn(state.rank, |c, _| dotc(&data[c * m..(c + 1) * m], r)))
}

/// `z = w̄ᴴ·Sᴴ·r`.
pub fn equalizer_output(state: &EqualizerState, r: &[C64]) -> Result<C64> {
    let rbar = project(state, r)?;
    Ok(dotc(&state.active_weights().as_slice()[..state.rank], rbar.as_slice()))
}

/// Nearest constellation point; exact ties go to the lowest index.
pub fn decide(z: C64, constellation: Constellation) -> C64 {
    let points = constellation.points();
    let mut best = points[0];
    let mut best_d = (z - best).norm_sqr();
    for &p in &points[1..] {
        let d = (z - p).norm_sqr();
        if d < best_d {
            best = p;
            best_d = d;
        }
    }
    best
}

/// Result of one two-pass detection.
#[derive(Debug, Clone)]
pub struct Detection {
    /// First-pass decisions from the received samples alone.
    pub first_pass: Vec<C64>,
    /// Final decisions.
    pub decisions: Vec<C64>,
    /// Soft outputs behind the final decisions.
    pub outputs: Vec<C64>,
    /// Stacked inputs behind the final decisions, one per stream.
    pub inputs: Vec<DVector<C64>>,
}

/// Two-pass parallel decision feedback over all streams.
///
/// Pass one filters with an all-zero feedback segment. Pass two rebuilds
/// each stacked input with the pass-one decisions of the other streams
/// (or `known` symbols while training) plus the decision history, then
/// filters and slices again. Linear mode stops after pass one.
pub fn detect_block<F: Combiner>(
    filters: &[F],
    y_stack: &[C64],
    fb: &FeedbackBuffer,
    mode: Mode,
    constellation: Constellation,
    known: Option<&[C64]>,
) -> Result<Detection> {
    let n_t = filters.len();
    if n_t != fb.n_t {
        return Err(Error::Dimensions(format!("{n_t} filters for {} streams", fb.n_t)));
    }
    let ny = y_stack.len();
    let m = ny + if mode == Mode::Dfe { fb.b * (n_t - 1) } else { 0 };
    let mut w = vec![ZERO; m];
    let mut composites = Vec::with_capacity(n_t);
    let mut first_pass = Vec::with_capacity(n_t);
    let mut first_out = Vec::with_capacity(n_t);
    for f in filters {
        f.composite_into(&mut w);
        let z = dotc(&w[..ny], y_stack);
        first_out.push(z);
        first_pass.push(decide(z, constellation));
        composites.push(w.clone());
    }

    if mode == Mode::Linear {
        let inputs = (0..n_t).map(|_| DVector::from_column_slice(y_stack)).collect();
        return Ok(Detection { decisions: first_pass.clone(), first_pass, outputs: first_out, inputs });
    }

    let current = known.unwrap_or(&first_pass);
    let mut decisions = Vec::with_capacity(n_t);
    let mut outputs = Vec::with_capacity(n_t);
    let mut inputs = Vec::with_capacity(n_t);
    for (j, wj) in composites.iter().enumerate() {
        let r = build_stacked_input(y_stack, fb, j, mode, Some(current))?;
        let z = dotc(wj, r.as_slice());
        outputs.push(z);
        decisions.push(decide(z, constellation));
        inputs.push(r);
    }
    Ok(Detection { first_pass, decisions, outputs, inputs })
}
