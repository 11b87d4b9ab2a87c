//! Single-run simulation: channel and symbols for one run index, then the
//! receiver for one algorithm variant.

use nalgebra::DMatrix;

use super::config::{noise_var, AlgorithmKind, ExperimentConfig};
use super::seed;
use crate::adaptation::{adapt_step, adapt_step_with_gain, FullRankRls, GainTracker, RankPolicy};
use crate::channel::{
    complex_noise, generate_fading, noiseless_received, ofdm_subcarrier_channels, stack_received_into, Constellation,
    MimoDims, SymbolFrame,
};
use crate::equalizer::{detect_block, Combiner, EqualizerState, FeedbackBuffer, Mode};
use crate::linalg::{C64, ZERO};
use crate::{Error, Result};

/// Everything random about one run: symbols, channel output and a unit
/// variance noise draw that is scaled per SNR.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub dims: MimoDims,
    pub frame: SymbolFrame,
    pub signal: DMatrix<C64>,
    pub noise: DMatrix<C64>,
}

impl Scenario {
    pub fn build(cfg: &ExperimentConfig, run_index: usize, fd_t: f64) -> Result<Self> {
        let run = run_index as u64;
        let dims = cfg.dims;
        let mut fading = cfg.fading.with_seed(seed::derive(cfg.master_seed, run, seed::CHANNEL), dims.l_p);
        fading.fd_t = fd_t;
        let channel = generate_fading(&fading, dims, cfg.n_symbols)?;
        let frame = SymbolFrame::random(
            dims.n_t,
            cfg.n_symbols,
            Constellation::Qpsk,
            seed::derive(cfg.master_seed, run, seed::SYMBOLS),
        );
        let signal = noiseless_received(&channel, &frame)?;
        let noise = complex_noise(dims.n_r, cfg.n_symbols, 1.0, seed::derive(cfg.master_seed, run, seed::NOISE))?;
        Ok(Self { dims, frame, signal, noise })
    }

    pub fn received(&self, snr_db: f64) -> DMatrix<C64> {
        let sigma = noise_var(self.dims.n_t, snr_db).sqrt();
        &self.signal + &self.noise * C64::new(sigma, 0.0)
    }
}

/// Receiver choices that vary within one experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variant {
    pub algorithm: AlgorithmKind,
    pub policy: RankPolicy,
    pub mode: Mode,
    pub lambda: f64,
    pub snr_db: f64,
}

impl Variant {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self { algorithm: cfg.algorithm, policy: cfg.rank_policy, mode: cfg.mode, lambda: cfg.lambda, snr_db: cfg.snr_db }
    }

    pub fn policy_label(&self) -> String {
        match self.algorithm {
            AlgorithmKind::Proposed => self.policy.label(),
            AlgorithmKind::FullRank => "full".into(),
        }
    }
}

/// Per-instant record of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub n_training: usize,
    /// Bits decided per instant across all streams (or tones).
    pub bits_per_instant: u64,
    /// Bit errors of the final decisions at each instant, training included.
    pub bit_errors: Vec<u32>,
    /// `Σ_j |x_j − z_j|²` at each instant.
    pub sq_error: Vec<f64>,
    /// Mean rank in use at each instant.
    pub rank: Vec<f64>,
    /// Number of filters contributing to each instant.
    pub filters: usize,
}

/// Totals over a window of instants.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WindowStats {
    pub bits: u64,
    pub errors: u64,
    pub ses_sum: f64,
    pub rank_sum: f64,
    pub instants: usize,
    pub filters: usize,
    pub training_only: bool,
}

impl RunTrace {
    fn new(n_training: usize, bits_per_instant: u64, filters: usize, n: usize) -> Self {
        Self {
            n_training,
            bits_per_instant,
            bit_errors: Vec::with_capacity(n),
            sq_error: Vec::with_capacity(n),
            rank: Vec::with_capacity(n),
            filters,
        }
    }

    pub fn len(&self) -> usize {
        self.bit_errors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bit_errors.is_empty()
    }

    /// Counts over `[start, end)`. Bits and errors only include instants
    /// after training; SES and rank use those same instants, or the whole
    /// window when it lies inside training.
    pub fn window(&self, start: usize, end: usize) -> WindowStats {
        let end = end.min(self.len());
        let start = start.min(end);
        let counted = start.max(self.n_training).min(end);
        let training_only = counted == end;
        let range = if training_only { start..end } else { counted..end };
        let mut s = WindowStats { training_only, filters: self.filters, ..Default::default() };
        if !training_only {
            s.bits = self.bits_per_instant * (end - counted) as u64;
            s.errors = self.bit_errors[counted..end].iter().map(|&e| e as u64).sum();
        }
        s.instants = range.len();
        s.ses_sum = self.sq_error[range.clone()].iter().sum();
        s.rank_sum = self.rank[range].iter().sum();
        s
    }

    /// BER over the whole post-training part.
    pub fn ber(&self) -> f64 {
        let w = self.window(0, self.len());
        if w.bits == 0 {
            0.0
        } else {
            w.errors as f64 / w.bits as f64
        }
    }

    /// `Σ sq_error` over the first `n` instants.
    pub fn early_ses(&self, n: usize) -> f64 {
        self.sq_error[..n.min(self.len())].iter().sum()
    }
}

/// Adaptive per-stream filter as seen by the run loop.
trait StreamFilter: Combiner {
    fn adapt(&mut self, r: &[C64], x_ref: C64) -> Result<()>;
    fn adapt_shared(&mut self, gain: &[C64], r: &[C64], x_ref: C64) -> Result<()>;
    fn rank(&self) -> usize;
}

impl StreamFilter for EqualizerState {
    fn adapt(&mut self, r: &[C64], x_ref: C64) -> Result<()> {
        adapt_step(self, r, x_ref).map(|_| ())
    }
    fn adapt_shared(&mut self, gain: &[C64], r: &[C64], x_ref: C64) -> Result<()> {
        adapt_step_with_gain(self, gain, r, x_ref).map(|_| ())
    }
    fn rank(&self) -> usize {
        self.rank
    }
}

impl StreamFilter for FullRankRls {
    fn adapt(&mut self, r: &[C64], x_ref: C64) -> Result<()> {
        self.step(r, x_ref, &mut crate::linalg::NoMeter).map(|_| ())
    }
    fn adapt_shared(&mut self, gain: &[C64], r: &[C64], x_ref: C64) -> Result<()> {
        self.step_with_gain(gain, r, x_ref).map(|_| ())
    }
    fn rank(&self) -> usize {
        self.w.len()
    }
}

/// Rank policy limited to what an `M`-dimensional input allows.
pub fn clamp_policy(policy: RankPolicy, m: usize) -> RankPolicy {
    match policy {
        RankPolicy::Fixed(d) => RankPolicy::Fixed(d.clamp(1, m)),
        RankPolicy::Auto { d_min, d_max } => {
            let hi = d_max.clamp(1, m);
            RankPolicy::Auto { d_min: d_min.clamp(1, hi), d_max: hi }
        }
    }
}

enum Bank {
    Proposed(Vec<EqualizerState>),
    Full(Vec<FullRankRls>),
}

fn make_bank(cfg: &ExperimentConfig, dims: MimoDims, variant: &Variant, policy: RankPolicy) -> Result<Bank> {
    let m = dims.m();
    Ok(match variant.algorithm {
        AlgorithmKind::Proposed => Bank::Proposed(
            (0..dims.n_t)
                .map(|j| EqualizerState::new(j, dims, policy, variant.lambda, cfg.delta, cfg.target_scaling))
                .collect::<Result<_>>()?,
        ),
        AlgorithmKind::FullRank => {
            Bank::Full((0..dims.n_t).map(|_| FullRankRls::new(m, variant.lambda, cfg.delta)).collect::<Result<_>>()?)
        }
    })
}

/// Runs the receiver of `variant` over `scenario`.
pub fn simulate(cfg: &ExperimentConfig, scenario: &Scenario, variant: &Variant) -> Result<RunTrace> {
    let dims = match variant.mode {
        Mode::Dfe => scenario.dims,
        Mode::Linear => scenario.dims.without_feedback(),
    };
    variant.policy.validate(dims.m())?;
    let received = scenario.received(variant.snr_db);
    match make_bank(cfg, dims, variant, variant.policy)? {
        Bank::Proposed(mut f) => run_loop(&mut f, cfg, dims, variant, &received, &scenario.frame),
        Bank::Full(mut f) => run_loop(&mut f, cfg, dims, variant, &received, &scenario.frame),
    }
}

fn run_loop<F: StreamFilter>(
    filters: &mut [F],
    cfg: &ExperimentConfig,
    dims: MimoDims,
    variant: &Variant,
    received: &DMatrix<C64>,
    frame: &SymbolFrame,
) -> Result<RunTrace> {
    let n = frame.len();
    let n_t = dims.n_t;
    let constellation = frame.constellation;
    let mut trace = RunTrace::new(cfg.n_training, (n_t * constellation.bits_per_symbol()) as u64, n_t, n);
    let mut fb = FeedbackBuffer::new(dims);
    let mut shared = match variant.mode {
        Mode::Linear => Some(GainTracker::new(dims.m(), variant.lambda, cfg.delta)?),
        Mode::Dfe => None,
    };
    let mut y = vec![ZERO; dims.window_len()];
    let mut x = vec![ZERO; n_t];
    let mut refs = vec![ZERO; n_t];

    for i in 0..n {
        stack_received_into(received, i, dims, &mut y);
        for (j, v) in x.iter_mut().enumerate() {
            *v = frame.symbols[(j, i)];
        }
        let training = i < cfg.n_training;
        let det = detect_block(filters, &y, &fb, variant.mode, constellation, training.then_some(x.as_slice()))?;

        let mut errors = 0u32;
        let mut sq = 0.0;
        let mut rank = 0usize;
        for j in 0..n_t {
            errors += constellation.bit_errors(det.decisions[j], x[j]);
            sq += (x[j] - det.outputs[j]).norm_sqr();
            rank += filters[j].rank();
            refs[j] = if training { x[j] } else { det.decisions[j] };
        }
        trace.bit_errors.push(errors);
        trace.sq_error.push(sq);
        trace.rank.push(rank as f64 / n_t as f64);

        match shared.as_mut() {
            Some(g) => {
                let k = g.update(det.inputs[0].as_slice(), &mut crate::linalg::NoMeter);
                for (j, f) in filters.iter_mut().enumerate() {
                    f.adapt_shared(k, det.inputs[j].as_slice(), refs[j])?;
                }
            }
            None => {
                for (j, f) in filters.iter_mut().enumerate() {
                    f.adapt(det.inputs[j].as_slice(), refs[j])?;
                }
            }
        }
        fb.push(&refs);
    }
    Ok(trace)
}

/// One run at the configuration's own settings.
pub fn run_single(cfg: &ExperimentConfig, run_index: usize) -> Result<RunTrace> {
    cfg.validate()?;
    Scenario::build(cfg, run_index, cfg.fading.fd_t)
        .and_then(|s| simulate(cfg, &s, &Variant::from_config(cfg)))
        .map_err(|e| Error::Run { run: run_index, source: Box::new(e) })
}

/// Everything random about one OFDM run with `n_t = n_r` antennas.
#[derive(Debug, Clone)]
pub struct OfdmScenario {
    pub n_antennas: usize,
    pub n_blocks: usize,
    pub n_subcarriers: usize,
    /// `N` tone matrices per block, block-major.
    pub tones: Vec<DMatrix<C64>>,
    /// `n_t × (n_blocks·N)`, column `b·N + n`.
    pub frame: SymbolFrame,
    /// Unit-variance noise, `n_r × (n_blocks·N)`.
    pub noise: DMatrix<C64>,
}

impl OfdmScenario {
    /// The channel is sampled once per OFDM block, so the per-block Doppler
    /// is `fd_t·(N + CP)`.
    pub fn build(cfg: &ExperimentConfig, run_index: usize, n_antennas: usize) -> Result<Self> {
        let run = run_index as u64;
        let l_p = cfg.dims.l_p;
        let phys = MimoDims::new(n_antennas, n_antennas, l_p, l_p, 0)?;
        let n_sc = cfg.ofdm.n_subcarriers;
        let block_len = n_sc + cfg.ofdm.cyclic_prefix;
        let mut fading = cfg.fading.with_seed(seed::derive(cfg.master_seed, run, seed::CHANNEL), l_p);
        fading.fd_t = cfg.fading.fd_t * block_len as f64;
        let n_blocks = cfg.n_symbols;
        let channel = generate_fading(&fading, phys, n_blocks)?;
        let mut tones = Vec::with_capacity(n_blocks * n_sc);
        for b in 0..n_blocks {
            tones.extend(ofdm_subcarrier_channels(&channel, b, n_sc)?);
        }
        let frame = SymbolFrame::random(
            n_antennas,
            n_blocks * n_sc,
            Constellation::Qpsk,
            seed::derive(cfg.master_seed, run, seed::SYMBOLS),
        );
        let noise = complex_noise(n_antennas, n_blocks * n_sc, 1.0, seed::derive(cfg.master_seed, run, seed::NOISE))?;
        Ok(Self { n_antennas, n_blocks, n_subcarriers: n_sc, tones, frame, noise })
    }
}

/// Per-tone linear spatial equalization; one adaptive filter bank per tone,
/// updated once per OFDM block. Trace instants are blocks.
pub fn simulate_ofdm(cfg: &ExperimentConfig, scenario: &OfdmScenario, variant: &Variant) -> Result<RunTrace> {
    let n_a = scenario.n_antennas;
    let n_sc = scenario.n_subcarriers;
    let dims = MimoDims::new(n_a, n_a, 1, 1, 0)?;
    let policy = clamp_policy(variant.policy, dims.m());
    let sigma = C64::new(noise_var(n_a, variant.snr_db).sqrt(), 0.0);
    let constellation = scenario.frame.constellation;
    let bits = (n_a * n_sc * constellation.bits_per_symbol()) as u64;
    let mut trace = RunTrace::new(cfg.n_training, bits, n_a * n_sc, scenario.n_blocks);
    trace.bit_errors.resize(scenario.n_blocks, 0);
    trace.sq_error.resize(scenario.n_blocks, 0.0);
    trace.rank.resize(scenario.n_blocks, 0.0);
    let v = Variant { policy, mode: Mode::Linear, ..*variant };

    for tone in 0..n_sc {
        match make_bank(cfg, dims, &v, policy)? {
            Bank::Proposed(mut f) => ofdm_tone(&mut f, cfg, scenario, &v, tone, sigma, &mut trace)?,
            Bank::Full(mut f) => ofdm_tone(&mut f, cfg, scenario, &v, tone, sigma, &mut trace)?,
        }
    }
    let per = (n_a * n_sc) as f64;
    trace.rank.iter_mut().for_each(|r| *r /= per);
    Ok(trace)
}

fn ofdm_tone<F: StreamFilter>(
    filters: &mut [F],
    cfg: &ExperimentConfig,
    sc: &OfdmScenario,
    variant: &Variant,
    tone: usize,
    sigma: C64,
    trace: &mut RunTrace,
) -> Result<()> {
    let n_a = sc.n_antennas;
    let dims = MimoDims::new(n_a, n_a, 1, 1, 0)?;
    let fb = FeedbackBuffer::new(dims);
    let mut gain = GainTracker::new(n_a, variant.lambda, cfg.delta)?;
    let constellation = sc.frame.constellation;
    let mut x = vec![ZERO; n_a];
    let mut y = vec![ZERO; n_a];
    for b in 0..sc.n_blocks {
        let col = b * sc.n_subcarriers + tone;
        let h = &sc.tones[b * sc.n_subcarriers + tone];
        for (j, v) in x.iter_mut().enumerate() {
            *v = sc.frame.symbols[(j, col)];
        }
        for (k, v) in y.iter_mut().enumerate() {
            *v = (0..n_a).map(|j| h[(k, j)] * x[j]).sum::<C64>() + sc.noise[(k, col)] * sigma;
        }
        let training = b < cfg.n_training;
        let det = detect_block(filters, &y, &fb, Mode::Linear, constellation, None)?;
        let k = gain.update(&y, &mut crate::linalg::NoMeter);
        for j in 0..n_a {
            trace.bit_errors[b] += constellation.bit_errors(det.decisions[j], x[j]);
            trace.sq_error[b] += (x[j] - det.outputs[j]).norm_sqr();
            trace.rank[b] += filters[j].rank() as f64;
            let x_ref = if training { x[j] } else { det.decisions[j] };
            filters[j].adapt_shared(k, &y, x_ref)?;
        }
    }
    Ok(())
}
