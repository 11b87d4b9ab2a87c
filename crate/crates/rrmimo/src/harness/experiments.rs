//! Experiment families. Every family runs its sweep points on the same
//! per-run realizations (paired seeds) and reduces in run order.

use super::config::{AlgorithmKind, ExperimentConfig};
use super::engine::{simulate, simulate_ofdm, OfdmScenario, RunTrace, Scenario, Variant};
use super::record::BerRecord;
use crate::adaptation::RankPolicy;
use crate::equalizer::Mode;
use crate::parallel::map_indexed;
use crate::{Error, Result};

/// Forgetting factors tried at each point of [`fading_sweep`].
pub const LAMBDA_GRID: [f64; 4] = [0.99, 0.995, 0.998, 0.999];

/// One sweep point: the value swept and the receiver used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub value: f64,
    pub variant: Variant,
}

/// Records plus the per-run traces behind them, `traces[point][run]`.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub records: Vec<BerRecord>,
    pub points: Vec<Point>,
    pub traces: Vec<Vec<RunTrace>>,
}

impl SweepOutcome {
    /// Index of the first point matching `pred`.
    pub fn find(&self, pred: impl Fn(&Point) -> bool) -> Option<usize> {
        self.points.iter().position(pred)
    }

    /// Post-training BER of every run at point `idx`.
    pub fn run_bers(&self, idx: usize) -> Vec<f64> {
        self.traces[idx].iter().map(|t| t.ber()).collect()
    }
}

/// Execute `per_run` for every run index and transpose to `[point][run]`.
fn monte_carlo<F>(cfg: &ExperimentConfig, n_points: usize, per_run: F) -> Result<Vec<Vec<RunTrace>>>
where
    F: Fn(usize) -> Result<Vec<RunTrace>> + Sync + Send,
{
    let runs = map_indexed(cfg.n_runs, cfg.execution, |run| {
        per_run(run).map_err(|e| Error::Run { run, source: Box::new(e) })
    });
    let mut out: Vec<Vec<RunTrace>> = (0..n_points).map(|_| Vec::with_capacity(cfg.n_runs)).collect();
    for traces in runs {
        for (p, t) in traces?.into_iter().enumerate() {
            out[p].push(t);
        }
    }
    Ok(out)
}

struct RecordSpec<'a> {
    experiment: &'a str,
    sweep_var: &'a str,
}

fn make_record(
    cfg: &ExperimentConfig,
    spec: &RecordSpec<'_>,
    point: &Point,
    traces: &[RunTrace],
    window: (usize, usize),
) -> BerRecord {
    let (mut bits, mut errors, mut ses, mut rank, mut inst, mut slots) = (0u64, 0u64, 0.0, 0.0, 0usize, 0usize);
    let mut training_phase = true;
    for t in traces {
        let w = t.window(window.0, window.1);
        bits += w.bits;
        errors += w.errors;
        ses += w.ses_sum;
        rank += w.rank_sum;
        inst += w.instants;
        slots += w.instants * w.filters;
        training_phase &= w.training_only;
    }
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    BerRecord {
        experiment: spec.experiment.to_string(),
        sweep_var: spec.sweep_var.to_string(),
        sweep_value: point.value,
        algorithm: point.variant.algorithm.name().to_string(),
        mode: match point.variant.mode {
            Mode::Dfe => "dfe".into(),
            Mode::Linear => "linear".into(),
        },
        d_policy: point.variant.policy_label(),
        runs: traces.len(),
        bits,
        errors,
        ber: ratio(errors as f64, bits as f64),
        mean_ses: ratio(ses, slots as f64),
        mean_rank: ratio(rank, inst as f64),
        seed: cfg.master_seed,
        config_hash: cfg.hash(),
        training_phase,
        lambda: point.variant.lambda,
    }
}

fn whole_frame_records(cfg: &ExperimentConfig, spec: RecordSpec<'_>, points: &[Point], traces: &[Vec<RunTrace>]) -> Vec<BerRecord> {
    points
        .iter()
        .zip(traces)
        .map(|(p, t)| make_record(cfg, &spec, p, t, (0, usize::MAX)))
        .collect()
}

fn variant(cfg: &ExperimentConfig, algorithm: AlgorithmKind, policy: RankPolicy) -> Variant {
    Variant { algorithm, policy, ..Variant::from_config(cfg) }
}

fn run_points(cfg: &ExperimentConfig, points: &[Point]) -> Result<Vec<Vec<RunTrace>>> {
    cfg.validate()?;
    monte_carlo(cfg, points.len(), |run| {
        let scenario = Scenario::build(cfg, run, cfg.fading.fd_t)?;
        points.iter().map(|p| simulate(cfg, &scenario, &p.variant)).collect()
    })
}

/// Proposed receiver at each fixed rank in `d_values`.
pub fn rank_sweep(cfg: &ExperimentConfig, d_values: &[usize]) -> Result<SweepOutcome> {
    let points: Vec<Point> = d_values
        .iter()
        .map(|&d| Point { value: d as f64, variant: variant(cfg, AlgorithmKind::Proposed, RankPolicy::Fixed(d)) })
        .collect();
    let traces = run_points(cfg, &points)?;
    let records = whole_frame_records(cfg, RecordSpec { experiment: "rank-sweep", sweep_var: "rank" }, &points, &traces);
    Ok(SweepOutcome { records, points, traces })
}

/// Windowed BER between consecutive checkpoints for each rank policy of the
/// proposed receiver and, optionally, the full-rank baseline.
pub fn ber_vs_symbols(
    cfg: &ExperimentConfig,
    checkpoints: &[usize],
    policies: &[RankPolicy],
    with_full_rank: bool,
) -> Result<SweepOutcome> {
    let mut points: Vec<Point> =
        policies.iter().map(|&p| Point { value: 0.0, variant: variant(cfg, AlgorithmKind::Proposed, p) }).collect();
    if with_full_rank {
        points.push(Point { value: 0.0, variant: variant(cfg, AlgorithmKind::FullRank, cfg.rank_policy) });
    }
    let traces = run_points(cfg, &points)?;
    let spec = RecordSpec { experiment: "ber-symbols", sweep_var: "symbols" };
    let mut records = Vec::new();
    for (p, t) in points.iter().zip(&traces) {
        let mut prev = 0;
        for &c in checkpoints {
            let at = Point { value: c as f64, ..*p };
            records.push(make_record(cfg, &spec, &at, t, (prev, c)));
            prev = c;
        }
    }
    Ok(SweepOutcome { records, points, traces })
}

/// BER against SNR for each algorithm.
pub fn snr_sweep(cfg: &ExperimentConfig, snr_values: &[f64], algorithms: &[AlgorithmKind]) -> Result<SweepOutcome> {
    let points: Vec<Point> = algorithms
        .iter()
        .flat_map(|&a| {
            snr_values
                .iter()
                .map(move |&s| Point { value: s, variant: Variant { snr_db: s, ..variant(cfg, a, cfg.rank_policy) } })
        })
        .collect();
    let traces = run_points(cfg, &points)?;
    let records = whole_frame_records(cfg, RecordSpec { experiment: "ber-snr", sweep_var: "snr_db" }, &points, &traces);
    Ok(SweepOutcome { records, points, traces })
}

/// BER against normalized Doppler. The forgetting factor is chosen per point
/// and algorithm from [`LAMBDA_GRID`] by lowest aggregate BER; the outcome
/// keeps only the chosen λ.
pub fn fading_sweep(cfg: &ExperimentConfig, fdt_values: &[f64], algorithms: &[AlgorithmKind]) -> Result<SweepOutcome> {
    cfg.validate()?;
    let mut all = Vec::new();
    for &fd in fdt_values {
        for &a in algorithms {
            for &lambda in &LAMBDA_GRID {
                all.push(Point { value: fd, variant: Variant { lambda, ..variant(cfg, a, cfg.rank_policy) } });
            }
        }
    }
    let traces = monte_carlo(cfg, all.len(), |run| {
        let mut out = Vec::with_capacity(all.len());
        for &fd in fdt_values {
            let scenario = Scenario::build(cfg, run, fd)?;
            for p in all.iter().filter(|p| p.value == fd) {
                out.push(simulate(cfg, &scenario, &p.variant)?);
            }
        }
        Ok(out)
    })?;

    let mut points = Vec::new();
    let mut kept = Vec::new();
    for (chunk_pts, chunk_tr) in all.chunks(LAMBDA_GRID.len()).zip(traces.chunks(LAMBDA_GRID.len())) {
        let errors = |t: &Vec<RunTrace>| -> u64 { t.iter().map(|r| r.window(0, usize::MAX).errors).sum() };
        let best = (0..chunk_pts.len()).min_by_key(|&i| errors(&chunk_tr[i])).expect("grid is non-empty");
        points.push(chunk_pts[best]);
        kept.push(chunk_tr[best].clone());
    }
    let records = whole_frame_records(cfg, RecordSpec { experiment: "fading", sweep_var: "fd_t" }, &points, &kept);
    Ok(SweepOutcome { records, points, traces: kept })
}

/// Per-tone MIMO-OFDM with `n_t = n_r` antennas; linear mode.
pub fn ofdm_antenna_sweep(cfg: &ExperimentConfig, nt_values: &[usize], algorithms: &[AlgorithmKind]) -> Result<SweepOutcome> {
    cfg.validate()?;
    let points: Vec<Point> = nt_values
        .iter()
        .flat_map(|&n| {
            algorithms.iter().map(move |&a| Point {
                value: n as f64,
                variant: Variant { mode: Mode::Linear, ..variant(cfg, a, cfg.rank_policy) },
            })
        })
        .collect();
    let traces = monte_carlo(cfg, points.len(), |run| {
        let mut out = Vec::with_capacity(points.len());
        for &n in nt_values {
            let scenario = OfdmScenario::build(cfg, run, n)?;
            for p in points.iter().filter(|p| p.value == n as f64) {
                out.push(simulate_ofdm(cfg, &scenario, &p.variant)?);
            }
        }
        Ok(out)
    })?;
    let records = whole_frame_records(cfg, RecordSpec { experiment: "ofdm", sweep_var: "antennas" }, &points, &traces);
    Ok(SweepOutcome { records, points, traces })
}
