//! Quick invariant suite behind the `selftest` subcommand.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ExperimentConfig;
use super::engine::run_single;
use crate::adaptation::{adapt_step, GainTracker, RankPolicy, TargetScaling};
use crate::analysis::{count_operations, Algorithm, ComplexityParams};
use crate::channel::{assemble_channel_matrix, complex_noise, generate_fading, FadingConfig, MimoDims};
use crate::equalizer::{decide, EqualizerState};
use crate::linalg::{NoMeter, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<String, String>) -> CheckResult {
    match f() {
        Ok(detail) => CheckResult { name, passed: true, detail },
        Err(detail) => CheckResult { name, passed: false, detail },
    }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()
}

pub fn selftest() -> Vec<CheckResult> {
    vec![
        check("inverse covariance tracks accumulated data", || {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let m = 8;
            let mut g = GainTracker::new(m, 1.0, 0.5).map_err(|e| e.to_string())?;
            let mut acc = DMatrix::<C64>::from_diagonal_element(m, m, C64::new(0.5, 0.0));
            for _ in 0..200 {
                let r = random_vec(&mut rng, m);
                let k = g.update(&r, &mut NoMeter).to_vec();
                let rv = DVector::from_vec(r);
                acc += &rv * rv.adjoint();
                let kp = &g.p * &rv;
                let err = (DVector::from_vec(k) - kp).norm();
                if err > 1e-8 {
                    return Err(format!("gain identity off by {err:e}"));
                }
            }
            let err = (&g.p * &acc - DMatrix::<C64>::identity(m, m)).norm();
            if err < 1e-6 {
                Ok(format!("residual {err:.2e}"))
            } else {
                Err(format!("residual {err:e}"))
            }
        }),
        check("channel blocks are banded Toeplitz", || {
            let dims = MimoDims::new(2, 2, 3, 5, 1).map_err(|e| e.to_string())?;
            let ch = generate_fading(&FadingConfig { fd_t: 0.01, profile: vec![0.5, 0.3, 0.2], rng_seed: 4 }, dims, 3)
                .map_err(|e| e.to_string())?;
            let h = assemble_channel_matrix(&ch, 2).map_err(|e| e.to_string())?;
            for bk in 0..2 {
                for bj in 0..2 {
                    for c in 1..5 {
                        for r in 0..5 {
                            let above = if r == 0 { C64::new(0.0, 0.0) } else { h[(bk * 5 + r - 1, bj * 5 + c - 1)] };
                            if h[(bk * 5 + r, bj * 5 + c)] != above {
                                return Err(format!("block ({bk},{bj}) column {c} breaks the shift rule"));
                            }
                        }
                    }
                }
            }
            Ok("ok".into())
        }),
        check("noise variance", || {
            let n = complex_noise(1, 50_000, 0.5, 3).map_err(|e| e.to_string())?;
            let v = n.iter().map(|z| z.norm_sqr()).sum::<f64>() / 50_000.0;
            if (v - 0.5).abs() < 0.015 {
                Ok(format!("{v:.4}"))
            } else {
                Err(format!("{v:.4}"))
            }
        }),
        check("operation counts", || {
            let p = ComplexityParams { m: 10, d: 2, d_min: 3, d_max: 8 };
            let fr = count_operations(Algorithm::FullRank, p).map_err(|e| e.to_string())?;
            let pr = count_operations(Algorithm::Proposed, p).map_err(|e| e.to_string())?;
            let os = count_operations(Algorithm::ProposedOrderSelection, p).map_err(|e| e.to_string())?;
            if (fr.multiplications, pr.multiplications, os.additions) == (350, 390, 11) {
                Ok("350/390/11".into())
            } else {
                Err(format!("{} {} {}", fr.multiplications, pr.multiplications, os.additions))
            }
        }),
        check("slicer tie-break", || {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            if decide(C64::new(0.0, 0.0), crate::channel::Constellation::Qpsk) == C64::new(s, s) {
                Ok("ok".into())
            } else {
                Err("zero does not map to the first point".into())
            }
        }),
        check("auto rank stays in window", || {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let dims = MimoDims::new(2, 6, 1, 2, 1).map_err(|e| e.to_string())?;
            let policy = RankPolicy::Auto { d_min: 2, d_max: 5 };
            let mut eq = EqualizerState::new(0, dims, policy, 0.99, 0.01, TargetScaling::default()).map_err(|e| e.to_string())?;
            for _ in 0..300 {
                let r = random_vec(&mut rng, dims.m());
                let d = adapt_step(&mut eq, &r, C64::new(0.5, -0.5)).map_err(|e| e.to_string())?;
                if !(2..=5).contains(&d.rank) {
                    return Err(format!("rank {}", d.rank));
                }
            }
            Ok("ok".into())
        }),
        check("runs are reproducible", || {
            let cfg = ExperimentConfig { n_symbols: 120, n_training: 60, n_runs: 1, ..Default::default() };
            let a = run_single(&cfg, 0).map_err(|e| e.to_string())?;
            let b = run_single(&cfg, 0).map_err(|e| e.to_string())?;
            if a == b {
                Ok("ok".into())
            } else {
                Err("two runs with the same seed differ".into())
            }
        }),
    ]
}
